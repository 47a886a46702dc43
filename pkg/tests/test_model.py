import struct

import numpy as np
import pytest

from imputeinr.data import TimeSeriesWindow
from imputeinr.errors import CheckpointError, ShapeError, WindowTooLarge
from imputeinr.model import FORMAT_VERSION, MAGIC, ImputeINR, ModelConfig, resolve_structure
from imputeinr.synthetic import gen_trend_sinusoid, gen_two_distribution

SMALL = ModelConfig(d_model=16, n_blocks=1, channels_per_scale=4)


def test_structure_switches():
    w = gen_two_distribution(0, 256)
    # swap columns so the clusters are interleaved in file order
    w = TimeSeriesWindow(w.values[[0, 2, 1, 3]], w.mask, ["a", "b", "c", "d"])
    full = resolve_structure(ModelConfig(), w)
    np.testing.assert_array_equal(full.order.pi, [0, 2, 1, 3])
    assert full.group_sizes == [2, 2]
    no_cl = resolve_structure(ModelConfig(clustering=False), w)
    np.testing.assert_array_equal(no_cl.order.pi, [0, 1, 2, 3])
    assert no_cl.group_sizes == [2, 2]
    no_gr = resolve_structure(ModelConfig(grouping=False), w)
    np.testing.assert_array_equal(no_gr.order.pi, [0, 2, 1, 3])
    assert no_gr.group_sizes == [4]
    fixed = resolve_structure(ModelConfig(assignment=(0, 1, 0, 1)), w)
    np.testing.assert_array_equal(fixed.order.pi, [0, 2, 1, 3])
    with pytest.raises(ShapeError):
        resolve_structure(ModelConfig(assignment=(0, 1)), w)


def test_multi_scale_switch_changes_encoder():
    assert ModelConfig(multi_scale=False).encoder().kernel_sizes == (3,)
    assert ModelConfig().encoder().kernel_sizes == (3, 5, 7)


def _model():
    fx = gen_trend_sinusoid(0, n_vars=4, length=32)
    return ImputeINR.build(SMALL, fx.window, seed=3), fx.window


def test_observations_retained_bit_exact():
    model, w = _model()
    rng = np.random.default_rng(0)
    mask = (rng.random(w.values.shape) > 0.4).astype(int)
    holey = TimeSeriesWindow(np.where(mask == 1, w.values, np.nan), mask, w.variable_names)
    out = model.impute(holey)
    obs = mask.astype(bool)
    assert np.array_equal(out[obs], w.values[obs])
    assert np.all(np.isfinite(out))


def test_reconstruct_in_original_order():
    fx = gen_two_distribution(0, 64)
    w = TimeSeriesWindow(fx.values[[0, 2, 1, 3]], fx.mask)
    model = ImputeINR.build(SMALL, w, seed=0)
    prep = model.prepare(w)
    z = model.predict_standardized(prep.window)
    manual = prep.stats.invert(np.asarray(z.data if hasattr(z, "data") else z))[model.structure.order.inverse]
    np.testing.assert_array_equal(model.reconstruct(w), manual)


def test_impute_series_lengths():
    model, w = _model()
    long = TimeSeriesWindow(np.tile(w.values, 3)[:, :80], np.ones((4, 80)))
    long.mask[1, 70] = 0
    out = model.impute_series(long, 32)
    assert out.shape == (4, 80) and np.isfinite(out[1, 70])
    with pytest.raises(WindowTooLarge):
        model.impute_series(TimeSeriesWindow(w.values[:, :16], np.ones((4, 16))), 32)


def test_checkpoint_roundtrip(tmp_path):
    model, w = _model()
    model.meta = {"window": 32}
    path = tmp_path / "m.ckpt"
    model.save(path)
    again = ImputeINR.load(path)
    assert again.cfg == model.cfg
    assert again.meta == {"window": 32}
    assert list(again.weights) == list(model.weights)
    assert all(np.array_equal(again.weights[k], model.weights[k]) for k in model.weights)
    np.testing.assert_array_equal(again.impute(w), model.impute(w))
    again.save(tmp_path / "b.ckpt")
    assert (tmp_path / "b.ckpt").read_bytes() == path.read_bytes()


def test_checkpoint_errors(tmp_path):
    model, _ = _model()
    path = tmp_path / "m.ckpt"
    model.save(path)
    raw = path.read_bytes()
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOTACKPT" + raw[8:])
    with pytest.raises(CheckpointError):
        ImputeINR.load(bad)
    bad.write_bytes(raw[:-8])
    with pytest.raises(CheckpointError):
        ImputeINR.load(bad)
    bad.write_bytes(raw + b"\0" * 8)
    with pytest.raises(CheckpointError):
        ImputeINR.load(bad)
    (n,) = struct.unpack("<Q", raw[8:16])
    head = raw[16:16 + n].replace(f'"format_version": {FORMAT_VERSION}'.encode(), b'"format_version": 9')
    bad.write_bytes(MAGIC + struct.pack("<Q", len(head)) + head + raw[16 + n:])
    with pytest.raises(CheckpointError):
        ImputeINR.load(bad)


def test_config_dict_roundtrip():
    cfg = ModelConfig(kernel_sizes=(3, 5), assignment=(0, 0, 1), grouping=False)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
