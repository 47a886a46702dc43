import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imputeinr import autodiff as ad
from imputeinr.encoder import (EncoderConfig, conv_output_length, encoder_input, encoder_shapes, multiscale_conv,
                               patchify_embed)
from imputeinr.errors import PatchError, ShapeError


def random_weights(cfg, n_vars, seed=0, zero_bias=False):
    rng = np.random.default_rng(seed)
    w = {k: rng.normal(size=s) for k, s in encoder_shapes(cfg, n_vars).items()}
    if zero_bias:
        for k in w:
            if k.endswith(".b"):
                w[k][:] = 0.0
    return w


def direct_conv(x, W, b):
    """Loop oracle for zero-padded stride-1 convolution."""
    c_out, c_in, k = W.shape
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (p, p)))
    T = x.shape[1]
    out = np.zeros((c_out, T))
    for o in range(c_out):
        for t in range(T):
            out[o, t] = b[o] + np.sum(W[o] * xp[:, t:t + k])
    return out


def test_hand_convolution():
    cfg = EncoderConfig(kernel_sizes=(3,), channels_per_scale=1, patch_len=5, d_model=2)
    w = {"conv0.W": np.ones((1, 1, 3)), "conv0.b": np.zeros(1)}
    out = ad.value(multiscale_conv(np.ones((1, 5)), cfg, w))
    np.testing.assert_array_equal(out, [[2, 3, 3, 3, 2]])


def test_zero_weights_zero_output():
    cfg = EncoderConfig()
    w = {k: np.zeros(s) for k, s in encoder_shapes(cfg, 3).items()}
    out = ad.value(multiscale_conv(np.random.default_rng(0).normal(size=(6, 96)), cfg, w))
    assert out.shape == (48, 96) and not out.any()


def test_length_preserved_and_matches_oracle():
    cfg = EncoderConfig()
    assert cfg.paddings == (1, 2, 3)
    for k, p in zip(cfg.kernel_sizes, cfg.paddings):
        assert conv_output_length(96, k, p) == 96
    w = random_weights(cfg, 2)
    x = np.random.default_rng(1).normal(size=(4, 96))
    out = ad.value(multiscale_conv(x, cfg, w))
    assert out.shape == (cfg.out_channels, 96)
    for l in range(3):
        np.testing.assert_allclose(out[16 * l:16 * (l + 1)], direct_conv(x, w[f"conv{l}.W"], w[f"conv{l}.b"]),
                                   rtol=1e-12, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), a=st.floats(-5, 5))
def test_conv_linearity(seed, a):
    cfg = EncoderConfig(channels_per_scale=4)
    w = random_weights(cfg, 2, seed, zero_bias=True)
    x = np.random.default_rng(seed).normal(size=(4, 32))
    np.testing.assert_allclose(ad.value(multiscale_conv(a * x, cfg, w)), a * ad.value(multiscale_conv(x, cfg, w)),
                               rtol=1e-10, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), col=st.integers(0, 39))
def test_conv_locality(seed, col):
    cfg = EncoderConfig(channels_per_scale=4)
    w = random_weights(cfg, 2, seed)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 40))
    y = x.copy()
    y[:, col] += rng.normal(size=4)
    diff = np.abs(ad.value(multiscale_conv(x, cfg, w)) - ad.value(multiscale_conv(y, cfg, w))).max(axis=0)
    reach = max(cfg.kernel_sizes) // 2
    far = np.abs(np.arange(40) - col) > reach
    assert not diff[far].any()


def test_bad_weight_shape():
    cfg = EncoderConfig()
    w = random_weights(cfg, 2)
    with pytest.raises(ShapeError):
        multiscale_conv(np.zeros((6, 96)), cfg, w)  # built for 2 variables, given 3


def test_patch_counts():
    cfg = EncoderConfig()
    w = random_weights(cfg, 2)
    feats = np.random.default_rng(0).normal(size=(48, 96))
    assert patchify_embed(feats, cfg, w).shape == (12, 64)
    one = EncoderConfig(patch_len=96)
    assert patchify_embed(feats, one, random_weights(one, 2)).shape == (1, 64)
    with pytest.raises(PatchError):
        patchify_embed(feats[:, :90], cfg, w)


def test_patch_zero_embed_is_bias():
    cfg = EncoderConfig()
    w = random_weights(cfg, 2)
    w["embed.W"][:] = 0.0
    out = ad.value(patchify_embed(np.ones((48, 96)), cfg, w))
    np.testing.assert_array_equal(out, np.broadcast_to(w["embed.b"], out.shape))


def test_patch_layout():
    # token m must see exactly the columns m*P..(m+1)*P-1 of every channel
    cfg = EncoderConfig(kernel_sizes=(3,), channels_per_scale=2, patch_len=4, d_model=8)
    feats = np.arange(2 * 12, dtype=float).reshape(2, 12)
    W = np.eye(8)
    out = ad.value(patchify_embed(feats, cfg, {"embed.W": W, "embed.b": np.zeros(8)}))
    np.testing.assert_array_equal(out[1], np.concatenate([feats[0, 4:8], feats[1, 4:8]]))


def test_encoder_input_channels():
    vals = np.array([[1.0, np.nan], [2.0, 3.0]])
    mask = np.array([[1, 0], [1, 1]])
    x = encoder_input(vals, mask)
    np.testing.assert_array_equal(x, [[1, 0], [2, 3], [1, 0], [1, 1]])
