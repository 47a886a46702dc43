"""Seeded synthetic fixtures: the two-distribution set and trend + sinusoid series."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .data import TimeSeriesWindow, standardize
from .inr import InrConfig, InrParams, query_series
from .model import ModelConfig, resolve_structure
from .training import Adam


@dataclass(frozen=True)
class SynthSpec:
    kind: str = "two-distribution"
    n_vars: int = 4
    length: int = 512
    seed: int = 0
    noise: float = 0.1

    def __post_init__(self):
        if self.length < 8:
            raise ValueError("length must be >= 8")
        if self.kind not in ("two-distribution", "trend-sinusoid"):
            raise ValueError(f"unknown generator {self.kind!r}")


def gen_two_distribution(seed: int = 0, length: int = 512, noise: float = 0.1) -> TimeSeriesWindow:
    """Four variables: v1, v2 ~ N(0, 1); v3, v4 ~ N(1, 3).

    Each pair shares one latent draw plus a little independent noise, scaled
    so every variable keeps the target mean and variance.
    """
    rng = np.random.default_rng(seed)
    z1, z2 = rng.standard_normal(length), rng.standard_normal(length)
    e = rng.standard_normal((4, length))
    keep = np.sqrt(1.0 - noise**2)
    unit = np.stack([keep * z1 + noise * e[0], keep * z1 + noise * e[1],
                     keep * z2 + noise * e[2], keep * z2 + noise * e[3]])
    mean = np.array([0.0, 0.0, 1.0, 1.0])[:, None]
    std = np.sqrt(np.array([1.0, 1.0, 3.0, 3.0]))[:, None]
    return TimeSeriesWindow(mean + std * unit, np.ones((4, length)), ["v1", "v2", "v3", "v4"])


@dataclass
class TrendSinusoid:
    window: TimeSeriesWindow
    trend: np.ndarray  # (N, 4) cubic coefficients, lowest degree first
    freqs: np.ndarray  # (N, 2) integer frequencies
    amps: np.ndarray  # (N, 2)
    phases: np.ndarray  # (N, 2)

    def clean(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        trend = self.trend @ (t[None, :] ** np.arange(4)[:, None])
        phase = 2 * np.pi * self.freqs[:, :, None] * t[None, None, :] + self.phases[:, :, None]
        return trend + (self.amps[:, :, None] * np.sin(phase)).sum(axis=1)


def gen_trend_sinusoid(seed: int = 0, n_vars: int = 6, length: int = 96, noise: float = 0.05) -> TrendSinusoid:
    """Cubic trend plus two integer-frequency sinusoids per variable, plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    trend = rng.normal(0.0, 1.0, (n_vars, 4))
    freqs = np.stack([rng.choice(np.arange(1, 9), size=2, replace=False) for _ in range(n_vars)])
    amps = rng.uniform(0.5, 1.5, (n_vars, 2))
    phases = rng.uniform(0.0, 2 * np.pi, (n_vars, 2))
    t = np.linspace(0.0, 1.0, length)
    out = TrendSinusoid(None, trend, freqs, amps, phases)
    values = out.clean(t) + noise * rng.standard_normal((n_vars, length))
    out.window = TimeSeriesWindow(values, np.ones((n_vars, length)), [f"x{i + 1}" for i in range(n_vars)])
    return out


def generate(cfg: SynthSpec) -> TimeSeriesWindow:
    if cfg.kind == "two-distribution":
        return gen_two_distribution(cfg.seed, cfg.length, cfg.noise)
    return gen_trend_sinusoid(cfg.seed, cfg.n_vars, cfg.length, cfg.noise).window


CORRECT_PAIRS = (0, 0, 1, 1)
CROSSED_PAIRS = (0, 1, 0, 1)


def model_variant(tag: str, partition=CORRECT_PAIRS, base: ModelConfig | None = None) -> ModelConfig:
    """The four residual architectures compared on the two-distribution fixture.

    A: one MLP, original order.  B: one MLP, clustered order.
    C: grouped residual on the true pairs.  D: grouped residual on crossed pairs.
    """
    base = base or ModelConfig()
    tag = tag.upper()
    assignment = tuple(int(a) for a in getattr(partition, "assignment", partition))
    if tag == "A":
        return _with(base, clustering=False, grouping=False, assignment=assignment)
    if tag == "B":
        return _with(base, clustering=True, grouping=False, assignment=assignment)
    if tag == "C":
        return _with(base, clustering=True, grouping=True, assignment=assignment)
    if tag == "D":
        return _with(base, clustering=True, grouping=True, assignment=crossed_assignment(assignment))
    raise ValueError(f"unknown variant {tag!r}; expected A, B, C or D")


def crossed_assignment(assignment) -> tuple[int, ...]:
    """Deal the j-th member of every cluster into group j, so each group mixes clusters."""
    assignment = np.asarray(assignment)
    out = np.zeros(len(assignment), dtype=int)
    for k in np.unique(assignment):
        for j, idx in enumerate(np.flatnonzero(assignment == k)):
            out[idx] = j
    return tuple(int(a) for a in out)


def _with(cfg: ModelConfig, **kw) -> ModelConfig:
    return replace(cfg, **kw)


@dataclass
class FitResult:
    tag: str
    curve: list[float]

    @property
    def final(self) -> float:
        return self.curve[-1]


def siren_init(config: InrConfig, group_sizes, rng) -> dict[str, np.ndarray]:
    """Sine-network initialisation: first layer U(-1, 1), later weights U(+-sqrt(6/fan_in)), zero biases."""
    blocks = {}
    for name, shape in config.blocks(group_sizes):
        if name.startswith("global0."):
            blocks[name] = rng.uniform(-1.0, 1.0, shape)
        elif name.endswith(".W"):
            bound = np.sqrt(6.0 / shape[0])
            blocks[name] = rng.uniform(-bound, bound, shape)
        else:
            blocks[name] = np.zeros(shape)
    return blocks


def fit_representation(w: TimeSeriesWindow, cfg: ModelConfig, steps: int = 500, lr: float = 1e-3,
                       seed: int = 0, tag: str = "") -> FitResult:
    """Fit one INR function directly to a fully observed series (no hypernetwork).

    This isolates the residual architecture: the same seeded initial draw and
    full-batch ADAM budget are given to every variant.  Returns the per-step
    MSE in standardized units, reordered by the variant's structure.
    """
    structure = resolve_structure(cfg, w)
    icfg = cfg.inr()
    blocks = siren_init(icfg, structure.group_sizes, np.random.default_rng(seed))
    z, _ = standardize(w)
    target = z.values[structure.order.pi]
    opt = Adam(lr)
    curve = []
    for _ in range(steps):
        leaves = {k: ad.Tensor(v, requires_grad=True) for k, v in blocks.items()}
        params = InrParams.from_blocks(icfg, structure.group_sizes, list(leaves.values()))
        diff = query_series(params, z.t_grid) - target
        loss = (diff * diff).mean()
        loss.backward()
        curve.append(float(loss.data))
        opt.step(blocks, {k: t.grad for k, t in leaves.items()})
    return FitResult(tag, curve)


def compare_residual_layouts(seed: int = 0, length: int = 512, steps: int = 500, lr: float = 1e-3,
                     tags: str = "ABCD") -> dict[str, FitResult]:
    """Fit variants A-D on the two-distribution fixture with a shared budget.

    The fixture is white noise in time, so the first sine layer's frequency is
    tied to the series length (omega0 = 2 * length) to make per-sample detail
    reachable within the budget.
    """
    w = gen_two_distribution(seed, length)
    base = ModelConfig(omega0=2.0 * length)
    return {t: fit_representation(w, model_variant(t, base=base), steps, lr, seed, t) for t in tags}
