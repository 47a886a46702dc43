"""The continuous time-series function: polynomial trend + Fourier seasonal + grouped residual MLP.

All evaluation routines accept either numpy arrays or autodiff tensors for
the parameters, so the same code path serves inference and training.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ShapeError


@dataclass(frozen=True)
class InrConfig:
    trend_degree: int = 3
    n_freqs: int = 8
    hidden: int = 16
    n_global: int = 1
    n_group: int = 1
    activation: str = "sine"
    omega0: float = 30.0

    def __post_init__(self):
        if self.trend_degree < 0 or self.n_freqs < 0:
            raise ValueError("trend_degree and n_freqs must be >= 0")
        if self.hidden < 1 or self.n_global < 1 or self.n_group < 0:
            raise ValueError("need hidden >= 1, n_global >= 1, n_group >= 0")
        if self.activation not in ("sine", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")

    def blocks(self, group_sizes) -> list[tuple[str, tuple[int, ...]]]:
        """Ordered (name, shape) census of every parameter block."""
        n = int(sum(group_sizes))
        h = self.hidden
        out = [("trend", (n, self.trend_degree + 1))]
        if self.n_freqs:
            out.append(("seasonal", (2, n, self.n_freqs)))
        for layer in range(self.n_global):
            fan_in = 1 if layer == 0 else h
            out += [(f"global{layer}.W", (fan_in, h)), (f"global{layer}.b", (h,))]
        for k, size in enumerate(group_sizes):
            for layer in range(self.n_group):
                out += [(f"group{k}.hidden{layer}.W", (h, h)), (f"group{k}.hidden{layer}.b", (h,))]
            out += [(f"group{k}.head.W", (h, size)), (f"group{k}.head.b", (size,))]
        return out

    def total_len(self, group_sizes) -> int:
        """Closed-form parameter count."""
        n, h, m, F = int(sum(group_sizes)), self.hidden, self.trend_degree, self.n_freqs
        K = len(group_sizes)
        global_params = (h + h) + (self.n_global - 1) * (h * h + h)
        group_params = K * self.n_group * (h * h + h) + n * (h + 1)
        return n * (m + 1) + 2 * n * F + global_params + group_params


@dataclass
class InrParams:
    """Parameters of one window's continuous function (reordered variable order)."""

    config: InrConfig
    group_sizes: list[int]
    trend: object
    season_sin: object
    season_cos: object
    global_layers: list = field(default_factory=list)
    group_hidden: list = field(default_factory=list)
    group_heads: list = field(default_factory=list)

    @classmethod
    def from_blocks(cls, config: InrConfig, group_sizes, blocks):
        """Build from the flat block list in census order (arrays or tensors)."""
        census = config.blocks(group_sizes)
        if len(blocks) != len(census):
            raise ShapeError(f"expected {len(census)} blocks, got {len(blocks)}")
        named = {}
        for (name, shape), blk in zip(census, blocks):
            if tuple(blk.shape) != shape:
                raise ShapeError(f"block {name}: expected {shape}, got {tuple(blk.shape)}")
            named[name] = blk
        n = int(sum(group_sizes))
        if config.n_freqs:
            seasonal = named["seasonal"]
            season_sin, season_cos = seasonal[0], seasonal[1]
        else:
            season_sin = season_cos = np.zeros((n, 0))
        glob = [(named[f"global{l}.W"], named[f"global{l}.b"]) for l in range(config.n_global)]
        hidden = [
            [(named[f"group{k}.hidden{l}.W"], named[f"group{k}.hidden{l}.b"]) for l in range(config.n_group)]
            for k in range(len(group_sizes))
        ]
        heads = [(named[f"group{k}.head.W"], named[f"group{k}.head.b"]) for k in range(len(group_sizes))]
        return cls(config, list(group_sizes), named["trend"], season_sin, season_cos, glob, hidden, heads)

    def to_blocks(self) -> list:
        blocks = [self.trend]
        if self.config.n_freqs:
            blocks.append(np.stack([ad.value(self.season_sin), ad.value(self.season_cos)]))
        for W, b in self.global_layers:
            blocks += [W, b]
        for hid, (W, b) in zip(self.group_hidden, self.group_heads):
            for hW, hb in hid:
                blocks += [hW, hb]
            blocks += [W, b]
        return blocks

    @property
    def n_vars(self) -> int:
        return int(sum(self.group_sizes))

    def numpy(self) -> "InrParams":
        return InrParams.from_blocks(self.config, self.group_sizes, [ad.value(b) for b in self.to_blocks()])

    @classmethod
    def random(cls, config: InrConfig, group_sizes, rng, scale: float = 0.5):
        blocks = [rng.normal(0.0, scale, shape) for _, shape in config.blocks(group_sizes)]
        return cls.from_blocks(config, group_sizes, blocks)


# -- scalar reference evaluations -------------------------------------------

def trend_eval(coeffs, t: float) -> float:
    """Polynomial sum_i coeffs[i] t^i by Horner's rule."""
    acc = 0.0
    for c in reversed(list(np.asarray(coeffs, dtype=np.float64))):
        acc = acc * t + c
    return float(acc)


def seasonal_eval(sin_c, cos_c, t: float) -> float:
    sin_c = np.asarray(sin_c, dtype=np.float64)
    cos_c = np.asarray(cos_c, dtype=np.float64)
    freqs = np.arange(1, len(sin_c) + 1)
    return float(sin_c @ np.sin(2 * np.pi * freqs * t) + cos_c @ np.cos(2 * np.pi * freqs * t))


# -- grid evaluations (ndarray or Tensor parameters) --------------------------

def _act(x, config: InrConfig, first: bool):
    if config.activation == "relu":
        return ad.relu(x)
    return ad.sin(x * config.omega0) if first else ad.sin(x)


def _column(t) -> np.ndarray:
    return np.atleast_1d(np.asarray(t, dtype=np.float64))[:, None]


def trend_grid(params: InrParams, t):
    """(N, T) polynomial trend at timestamps ``t``."""
    powers = _column(t) ** np.arange(params.config.trend_degree + 1)
    return params.trend @ powers.T


def seasonal_grid(params: InrParams, t):
    n = params.n_vars
    if not params.config.n_freqs:
        return np.zeros((n, len(np.atleast_1d(t))))
    phase = 2 * np.pi * _column(t) * np.arange(1, params.config.n_freqs + 1)
    return params.season_sin @ np.sin(phase).T + params.season_cos @ np.cos(phase).T


def residual_forward(params: InrParams, t, partition=None):
    """Grouped residual MLP at timestamps ``t`` -> (N, T) in reordered order.

    Shared global layers map t to a hidden feature; every group runs its own
    hidden layers and a linear head producing its cluster's variables, and
    the group outputs are concatenated in group order.
    """
    if partition is not None and list(partition.sizes) != list(params.group_sizes):
        raise ShapeError(f"partition sizes {partition.sizes} != parameter groups {params.group_sizes}")
    cfg = params.config
    h = _column(t)
    for layer, (W, b) in enumerate(params.global_layers):
        h = _act(h @ W + b, cfg, first=layer == 0)
    outs = []
    for hidden, (W, b) in zip(params.group_hidden, params.group_heads):
        x = h
        for hW, hb in hidden:
            x = _act(x @ hW + hb, cfg, first=False)
        outs.append(x @ W + b)
    res = ad.concat(outs, axis=1) if any(isinstance(o, ad.Tensor) for o in outs) else np.concatenate(outs, axis=1)
    return res.T


def query_series(params: InrParams, t_grid, partition=None):
    """Evaluate f = trend + seasonal + residual on every timestamp; (N, T)."""
    return trend_grid(params, t_grid) + seasonal_grid(params, t_grid) + residual_forward(params, t_grid, partition)


def inr_eval(params: InrParams, t: float, partition=None) -> np.ndarray:
    """f(t) for a single timestamp, length-N vector in reordered order."""
    return np.asarray(ad.value(query_series(params, [t], partition)))[:, 0]
