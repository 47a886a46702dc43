"""Masked reconstruction loss, gradients, ADAM and the training loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import TimeSeriesWindow, apply_random_mask
from .errors import EmptyMaskSet, NumericsError, ShapeError
from .model import ImputeINR

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    mask_rate: float = 0.7
    grad_clip: float = 1.0
    lr_schedule: str = "cosine"  # or "constant"; cosine decays lr to 0 over all steps

    def __post_init__(self):
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if not 0.0 < self.mask_rate < 1.0:
            raise ValueError("training mask rate must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size >= 1 and epochs >= 0 required")


@dataclass
class LossReport:
    loss: float
    count: int
    grad_norm: float = float("nan")


def masked_mse(pred, gt, miss_mask) -> LossReport:
    """Mean squared error over the cells where ``miss_mask`` is 1."""
    pred, gt, miss_mask = np.asarray(pred, float), np.asarray(gt, float), np.asarray(miss_mask)
    if pred.shape != gt.shape or pred.shape != miss_mask.shape:
        raise ShapeError(f"shapes differ: {pred.shape}, {gt.shape}, {miss_mask.shape}")
    count = int(miss_mask.sum())
    if count == 0:
        raise EmptyMaskSet("no positions to score")
    sel = miss_mask.astype(bool)
    diff = pred[sel] - gt[sel]
    return LossReport(float(diff @ diff) / count, count)


def squared_error_sum(pred, gt: np.ndarray, miss_mask: np.ndarray):
    """Differentiable sum of squared errors over scored cells."""
    diff = (pred - np.where(miss_mask.astype(bool), gt, 0.0)) * miss_mask.astype(np.float64)
    return (diff * diff).sum()


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            if params[k].shape != g.shape:
                raise ShapeError(f"{k}: grad {g.shape} vs param {params[k].shape}")
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


def adam_step(weights, grads, state: Adam | None = None, cfg: TrainConfig | None = None):
    """Functional wrapper: returns (new weights, optimizer state)."""
    if state is None:
        cfg = cfg or TrainConfig()
        state = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    new = dict(weights)
    state.step(new, grads)
    return new, state


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))


def clip_by_global_norm(grads, max_norm: float):
    norm = global_norm(grads)
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


@dataclass
class TrainingExample:
    """A prepared (reordered, standardized) window, with the cells to score."""

    inputs: TimeSeriesWindow
    target: np.ndarray
    score_mask: np.ndarray


def make_example(model: ImputeINR, w: TimeSeriesWindow, rate: float, seed: int) -> TrainingExample:
    """Hide a fresh fraction of observed cells; the model must reconstruct them.

    The window is standardized with the statistics of everything observed
    before the training mask is drawn, so the scale of the target does not
    depend on which cells happened to be hidden.
    """
    prep = model.prepare(w)
    z = prep.window
    masked, hidden = apply_random_mask(z, rate, seed)
    if hidden.sum() == 0:
        # too few observations to hide at this rate: score all observed cells
        hidden, masked = z.mask.copy(), z
    inputs = TimeSeriesWindow(np.where(masked.mask.astype(bool), z.values, 0.0), masked.mask,
                              z.variable_names, z.t_grid)
    return TrainingExample(inputs, z.values.copy(), hidden)


def loss_and_grads(model: ImputeINR, examples: list[TrainingExample], weights=None):
    """Pooled masked MSE over the examples and its gradient w.r.t. every weight."""
    weights = model.weights if weights is None else weights
    leaves = {k: ad.Tensor(v, requires_grad=True) for k, v in weights.items()}
    total = sum(int(ex.score_mask.sum()) for ex in examples)
    if total == 0:
        raise EmptyMaskSet("no positions to score in batch")
    loss_value = 0.0
    for ex in examples:
        pred = model.predict_standardized(ex.inputs, leaves)
        loss = squared_error_sum(pred, ex.target, ex.score_mask) * (1.0 / total)
        loss.backward()
        loss_value += float(loss.data)
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in leaves.items()}
    return loss_value, grads, total


def pooled_loss(model: ImputeINR, examples: list[TrainingExample], weights=None) -> float:
    """Forward-only version of :func:`loss_and_grads`."""
    weights = model.weights if weights is None else weights
    total = sum(int(ex.score_mask.sum()) for ex in examples)
    sse = sum(float(ad.value(squared_error_sum(model.predict_standardized(ex.inputs, weights),
                                               ex.target, ex.score_mask))) for ex in examples)
    return sse / total


@dataclass
class TrainResult:
    weights: dict[str, np.ndarray]
    curve: list[tuple[int, float, float]] = field(default_factory=list)


def scheduled_lr(cfg: TrainConfig, step: int, total: int) -> float:
    if cfg.lr_schedule == "constant" or total <= 1:
        return cfg.lr
    return 0.5 * cfg.lr * (1.0 + np.cos(np.pi * step / total))


def _example_seed(seed: int, epoch: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, epoch, index]).generate_state(1)[0])


def train(model: ImputeINR, windows: list[TimeSeriesWindow], cfg: TrainConfig,
          callback=None) -> TrainResult:
    """Self-supervised mask-and-reconstruct training; updates ``model.weights`` in place.

    Each epoch draws fresh training masks, shuffles windows with a seeded
    generator and takes one ADAM step per batch.
    """
    if not windows:
        raise ValueError("need at least one window")
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    rng = np.random.default_rng(cfg.seed)
    curve = []
    steps_per_epoch = -(-len(windows) // cfg.batch_size)
    total_steps, step = cfg.epochs * steps_per_epoch, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(windows))
        losses, norms = [], []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                batch = [make_example(model, windows[i], cfg.mask_rate, _example_seed(cfg.seed, epoch, int(i)))
                         for i in idx]
                loss, grads, _ = loss_and_grads(model, batch)
            except NumericsError as exc:
                raise NumericsError(str(exc), epoch=epoch, window=int(idx[0])) from exc
            grads, norm = clip_by_global_norm(grads, cfg.grad_clip)
            opt.lr = scheduled_lr(cfg, step, total_steps)
            opt.step(model.weights, grads)
            step += 1
            losses.append(loss)
            norms.append(norm)
        curve.append((epoch, float(np.mean(losses)), float(np.mean(norms))))
        if callback is not None:
            callback(epoch, curve[-1][1])
        log.debug("epoch %d loss %.6f grad-norm %.4f", epoch, curve[-1][1], curve[-1][2])
    return TrainResult(model.weights, curve)


def write_curve_csv(path, curve) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss,grad_norm\n")
        for epoch, loss, norm in curve:
            fh.write(f"{epoch},{loss!r},{norm!r}\n")
