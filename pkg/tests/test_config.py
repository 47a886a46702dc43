import pytest

from imputeinr import config as C


def test_three_layer_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nepochs = 7\nseed = 3\nhidden = 8\nwindow = 48\n", encoding="utf-8")
    defaults = C.build()
    assert defaults.train.epochs == 100 and defaults.seed == 0 and defaults.model.hidden == 16
    from_file = C.build(C.load_file(f))
    assert from_file.train.epochs == 7 and from_file.seed == 3 and from_file.train.seed == 3
    assert from_file.model.hidden == 8 and from_file.window == 48
    flagged = C.build(C.load_file(f), {"epochs": 2, "seed": None, "grouping": "false"})
    assert flagged.train.epochs == 2  # flag beats file
    assert flagged.seed == 3  # unset flag leaves the file value
    assert flagged.model.grouping is False and flagged.model.hidden == 8


def test_types_and_errors(tmp_path):
    cfg = C.build({"kernel_sizes": "3,5", "mask_rates": "0.1, 0.9", "stride": "none", "ablation": "yes",
                   "train_mask_rate": "0.4", "lr_schedule": "constant"})
    assert cfg.model.kernel_sizes == (3, 5) and cfg.mask_rates == (0.1, 0.9)
    assert cfg.stride is None and cfg.ablation is True
    assert cfg.train.mask_rate == 0.4 and cfg.train.lr_schedule == "constant"
    with pytest.raises(C.ConfigError):
        C.parse_text("bogus = 1")
    with pytest.raises(C.ConfigError):
        C.parse_text("epochs 3")
    with pytest.raises(C.ConfigError):
        C.build({"epochs": "many"})
    with pytest.raises(C.ConfigError):
        C.build({"clustering": "maybe"})
    with pytest.raises(C.ConfigError):
        C.build({"train_mask_rate": "1.5"})
    with pytest.raises(C.ConfigError):
        C.build({"data": str(tmp_path / "missing.csv")}).validate()
    with pytest.raises(C.ConfigError):
        C.build({"metrics_scale": "log"}).validate()


def test_dump_roundtrip():
    cfg = C.build({"epochs": "5", "omega0": "12.5", "assignment": "0,1,1", "mask_rates": "0.5"})
    again = C.build(C.parse_text(C.dump(cfg)))
    assert again == cfg
