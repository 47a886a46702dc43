import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imputeinr import autodiff as ad
from imputeinr.errors import EmptyMaskSet, NumericsError, ShapeError
from imputeinr.gradcheck import check_gradients, rel_error, tiny_problem
from imputeinr.model import ImputeINR, ModelConfig
from imputeinr.synthetic import gen_trend_sinusoid
from imputeinr.training import (Adam, TrainConfig, clip_by_global_norm, global_norm, loss_and_grads,
                                make_example, masked_mse, scheduled_lr, squared_error_sum, train)


def brute_mse(pred, gt, mask):
    total, count = 0.0, 0
    for i in range(len(gt)):
        for j in range(len(gt[0])):
            if mask[i][j]:
                total += (pred[i][j] - gt[i][j]) ** 2
                count += 1
    return total / count


def test_masked_mse_examples():
    gt = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert masked_mse(gt, gt, np.ones((2, 2))).loss == 0.0
    r = masked_mse([[1, 0], [0, 4]], gt, [[0, 1], [1, 0]])
    assert r.loss == 6.5 and r.count == 2
    with pytest.raises(EmptyMaskSet):
        masked_mse(gt, gt, np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        masked_mse(gt, gt[:1], np.ones((2, 2)))


@settings(max_examples=60)
@given(seed=st.integers(0, 100_000))
def test_masked_mse_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    pred, gt = rng.normal(size=(7, 13)), rng.normal(size=(7, 13))
    mask = (rng.random((7, 13)) < 0.5).astype(int)
    mask[rng.integers(7), rng.integers(13)] = 1
    assert abs(masked_mse(pred, gt, mask).loss - brute_mse(pred, gt, mask)) <= 1e-12


@settings(max_examples=40)
@given(seed=st.integers(0, 100_000))
def test_loss_ignores_unscored_cells(seed):
    rng = np.random.default_rng(seed)
    pred, gt = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
    mask = (rng.random((4, 6)) < 0.5).astype(int)
    mask[0, 0] = 1
    other = np.where(mask == 1, pred, rng.normal(size=(4, 6)) * 100)
    assert masked_mse(pred, gt, mask).loss == masked_mse(other, gt, mask).loss


def test_affine_bias_gradient_closed_form():
    rng = np.random.default_rng(0)
    x, gt = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
    mask = np.array([[1, 0], [1, 1], [0, 0], [0, 1], [1, 1]])
    W, b = ad.Tensor(rng.normal(size=(3, 2)), True), ad.Tensor(rng.normal(size=2), True)
    y = x @ W + b
    (squared_error_sum(y, gt, mask) * (1.0 / mask.sum())).backward()
    expected = (2 * (ad.value(y) - gt) * mask).sum(axis=0) / mask.sum()
    np.testing.assert_allclose(b.grad, expected, rtol=1e-12)


def test_key_bias_gradient_vanishes():
    # softmax is invariant to a per-query constant, so the key bias never affects the loss
    model, examples = tiny_problem(0)
    _, grads, _ = loss_and_grads(model, examples)
    assert np.abs(grads["block0.attn.bk"]).max() < 1e-14 * max(1.0, np.abs(grads["block0.attn.bq"]).max())


def test_gradient_check_tiny_config():
    model, examples = tiny_problem(0)
    res = check_gradients(model, examples)
    assert res.max_rel_error < 1e-4
    assert set(res.per_block) == set(model.weights)


def test_rel_error_floor():
    assert rel_error(0.0, 0.0) == 0.0
    assert rel_error(1.0, 1.0 + 1e-9) < 1e-8


def test_adam_zero_and_lr0():
    p = {"w": np.array([1.0, -2.0])}
    opt = Adam(1e-3)
    opt.step(p, {"w": np.zeros(2)})
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])
    frozen = Adam(0.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        frozen.step(p, {"w": rng.normal(size=2)})
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


def test_adam_first_step_hand_trace():
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    g = np.array([0.5, -3.0, 1e-9])
    p = {"w": np.zeros(3)}
    Adam(lr, b1, b2, eps).step(p, {"w": g})
    m_hat = ((1 - b1) * g) / (1 - b1)
    v_hat = ((1 - b2) * g * g) / (1 - b2)
    np.testing.assert_allclose(p["w"], -lr * m_hat / (np.sqrt(v_hat) + eps), rtol=1e-12)


def test_adam_constant_gradient_limit():
    p = {"w": np.zeros(1)}
    opt = Adam(1e-3)
    for _ in range(2000):
        before = p["w"].copy()
        opt.step(p, {"w": np.array([0.37])})
    assert abs(abs(p["w"][0] - before[0]) - 1e-3) < 1e-8


def test_clip_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert global_norm(g) == 5.0
    clipped, norm = clip_by_global_norm(g, 1.0)
    assert norm == 5.0
    assert global_norm(clipped) == pytest.approx(1.0)
    same, _ = clip_by_global_norm(g, 10.0)
    np.testing.assert_array_equal(same["a"], g["a"])


def test_schedule():
    cfg = TrainConfig(lr=1e-3)
    assert scheduled_lr(cfg, 0, 100) == 1e-3
    assert scheduled_lr(cfg, 50, 100) == pytest.approx(5e-4)
    assert scheduled_lr(TrainConfig(lr_schedule="constant"), 99, 100) == 1e-3
    with pytest.raises(ValueError):
        TrainConfig(mask_rate=1.0)
    with pytest.raises(ValueError):
        TrainConfig(lr_schedule="step")


def test_make_example_targets():
    fx = gen_trend_sinusoid(0)
    model = ImputeINR.build(ModelConfig(n_blocks=1, d_model=16), fx.window, seed=0)
    ex = make_example(model, fx.window, 0.5, 3)
    pi = model.structure.order.pi
    hidden = ex.score_mask.astype(bool)
    assert hidden.sum() == round(0.5 * fx.window.mask.sum())
    assert not np.any(ex.inputs.mask.astype(bool) & hidden)
    np.testing.assert_array_equal(ex.inputs.values[hidden], 0.0)
    v = fx.window.values[pi]
    z = (v - v.mean(axis=1, keepdims=True)) / v.std(axis=1, keepdims=True)
    np.testing.assert_allclose(ex.target, z, atol=1e-12)


def _small():
    fx = gen_trend_sinusoid(0, n_vars=3, length=32)
    cfg = ModelConfig(n_blocks=1, d_model=16, channels_per_scale=4)
    return fx.window, cfg


def test_zero_epochs_and_determinism():
    w, cfg = _small()
    model = ImputeINR.build(cfg, w, seed=1)
    init = {k: v.copy() for k, v in model.weights.items()}
    train(model, [w], TrainConfig(epochs=0))
    assert all(np.array_equal(init[k], model.weights[k]) for k in init)
    runs = []
    for _ in range(2):
        m = ImputeINR.build(cfg, w, seed=1)
        runs.append(train(m, [w, w], TrainConfig(epochs=3, batch_size=1, seed=4)))
    assert runs[0].curve == runs[1].curve
    assert all(np.array_equal(runs[0].weights[k], runs[1].weights[k]) for k in init)


def test_loss_decreases_on_sinusoids():
    fx = gen_trend_sinusoid(0)
    model = ImputeINR.build(ModelConfig(), fx.window, seed=0)
    curve = train(model, [fx.window], TrainConfig(epochs=60, batch_size=1)).curve
    assert curve[-1][1] < curve[0][1]
    assert all(np.isfinite(c[2]) for c in curve)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerics_error_reports_epoch():
    w, cfg = _small()
    model = ImputeINR.build(cfg, w, seed=0)
    model.weights["embed.W"] = model.weights["embed.W"] * np.inf
    with pytest.raises(NumericsError) as exc:
        train(model, [w], TrainConfig(epochs=2))
    assert exc.value.epoch == 0 and exc.value.window == 0
