"""Central finite-difference check of the analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TimeSeriesWindow
from .model import ImputeINR, ModelConfig
from .training import loss_and_grads, make_example, pooled_loss

TINY = ModelConfig(kernel_sizes=(3, 5, 7), channels_per_scale=16, patch_len=8, d_model=8, n_blocks=1,
                   n_heads=4, ff_mult=4, trend_degree=2, n_freqs=2, hidden=16)


@dataclass
class GradCheckResult:
    per_block: dict[str, float]
    checked: int

    @property
    def max_rel_error(self) -> float:
        return max(self.per_block.values())


def rel_error(analytic: float, numeric: float, floor: float = 1e-5) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(model: ImputeINR, examples, step: float = 1e-5, per_block: int = 6,
                    seed: int = 0) -> GradCheckResult:
    """Compare backprop against (L(w+h) - L(w-h)) / 2h on sampled entries of every weight block."""
    _, grads, _ = loss_and_grads(model, examples)
    rng = np.random.default_rng(seed)
    weights = {k: v.copy() for k, v in model.weights.items()}
    results, checked = {}, 0
    for name, w in weights.items():
        flat = w.reshape(-1)
        picks = rng.choice(flat.size, size=min(per_block, flat.size), replace=False)
        worst = 0.0
        for i in picks:
            orig = flat[i]
            flat[i] = orig + step
            up = pooled_loss(model, examples, weights)
            flat[i] = orig - step
            down = pooled_loss(model, examples, weights)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            worst = max(worst, rel_error(float(grads[name].reshape(-1)[i]), numeric))
            checked += 1
        results[name] = worst
    return GradCheckResult(results, checked)


def tiny_problem(seed: int = 0, n_vars: int = 4, T: int = 16, cfg: ModelConfig = TINY):
    """A small random model plus one training example for the gradient check."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, T)
    values = np.sin(2 * np.pi * (np.arange(n_vars)[:, None] + 1) * t) + 0.3 * rng.normal(size=(n_vars, T))
    w = TimeSeriesWindow(values, np.ones((n_vars, T)))
    model = ImputeINR.build(cfg, w, seed=seed)
    # move every weight off its initial special value (zeros, ones) so all paths are exercised
    for k, v in model.weights.items():
        model.weights[k] = v + 0.05 * rng.normal(size=v.shape)
    return model, [make_example(model, w, 0.5, seed + 1)]
