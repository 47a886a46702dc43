"""Multi-scale 1-D convolution over the value+mask channels, then patch embedding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import PatchError, ShapeError


@dataclass(frozen=True)
class EncoderConfig:
    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    channels_per_scale: int = 16
    patch_len: int = 8
    d_model: int = 64

    def __post_init__(self):
        if not self.kernel_sizes or any(k < 1 or k % 2 == 0 for k in self.kernel_sizes):
            raise ValueError("kernel sizes must be odd positive integers")

    @property
    def paddings(self) -> tuple[int, ...]:
        return tuple((k - 1) // 2 for k in self.kernel_sizes)

    @property
    def out_channels(self) -> int:
        return self.channels_per_scale * len(self.kernel_sizes)


def conv_output_length(T: int, k: int, p: int, s: int = 1) -> int:
    return (T - k + 2 * p) // s + 1


def encoder_shapes(cfg: EncoderConfig, n_vars: int) -> dict[str, tuple[int, ...]]:
    shapes = {}
    for l, k in enumerate(cfg.kernel_sizes):
        shapes[f"conv{l}.W"] = (cfg.channels_per_scale, 2 * n_vars, k)
        shapes[f"conv{l}.b"] = (cfg.channels_per_scale,)
    shapes["embed.W"] = (cfg.out_channels * cfg.patch_len, cfg.d_model)
    shapes["embed.b"] = (cfg.d_model,)
    return shapes


def encoder_input(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Stack standardized values over their observation mask: (2N, T)."""
    return np.concatenate([np.where(mask.astype(bool), values, 0.0), mask.astype(np.float64)], axis=0)


def multiscale_conv(x_prime, cfg: EncoderConfig, weights):
    """Apply every kernel size with 'same' padding; concatenate channels in kernel order."""
    outs = []
    for l, k in enumerate(cfg.kernel_sizes):
        W, b = weights[f"conv{l}.W"], weights[f"conv{l}.b"]
        expect = (cfg.channels_per_scale, x_prime.shape[0], k)
        if tuple(W.shape) != expect or tuple(b.shape) != (cfg.channels_per_scale,):
            raise ShapeError(f"conv{l}: expected weight {expect}, got {tuple(W.shape)}")
        outs.append(ad.conv1d_same(x_prime, W, b))
    if len(outs) == 1:
        return outs[0]
    return ad.concat(outs, axis=0)


def patchify_embed(features, cfg: EncoderConfig, weights):
    """Split time into non-overlapping patches and embed each C x patch_len block: (M, d_model)."""
    C, T = features.shape
    P = cfg.patch_len
    if T % P:
        raise PatchError(f"patch length {P} does not divide window length {T}")
    M = T // P
    blocks = features.reshape(C, M, P).transpose(1, 0, 2).reshape(M, C * P)
    W, b = weights["embed.W"], weights["embed.b"]
    if tuple(W.shape) != (C * P, cfg.d_model):
        raise ShapeError(f"embed.W: expected {(C * P, cfg.d_model)}, got {tuple(W.shape)}")
    return blocks @ W + b
