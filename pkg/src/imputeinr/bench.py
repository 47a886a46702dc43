"""Evaluation protocol: metrics, simple baselines, mask-rate sweeps and ablation grids."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import TimeSeriesWindow, apply_random_mask, make_windows, standardize
from .errors import EmptyMaskSet, ShapeError
from .model import ImputeINR, ModelConfig
from .training import TrainConfig, train

log = logging.getLogger(__name__)

REPORT_SCHEMA = 1
METHODS = ("ImputeINR", "Mean", "Zero")


def metrics(pred, gt, eval_mask) -> tuple[float, float]:
    """(MSE, MAE) over cells with eval_mask == 1."""
    pred, gt, eval_mask = np.asarray(pred, float), np.asarray(gt, float), np.asarray(eval_mask)
    if pred.shape != gt.shape or pred.shape != eval_mask.shape:
        raise ShapeError(f"shapes differ: {pred.shape}, {gt.shape}, {eval_mask.shape}")
    sel = eval_mask.astype(bool)
    if not sel.any():
        raise EmptyMaskSet("no cells to score")
    err = pred[sel] - gt[sel]
    return float(np.mean(err * err)), float(np.mean(np.abs(err)))


def baseline_mean(w: TimeSeriesWindow, warnings: list | None = None) -> np.ndarray:
    """Fill missing cells with the variable's observed mean (0 when nothing is observed)."""
    obs = w.mask.astype(bool)
    counts = obs.sum(axis=1)
    means = np.where(obs, w.values, 0.0).sum(axis=1) / np.maximum(counts, 1)
    for i in np.flatnonzero(counts == 0):
        msg = f"variable {w.variable_names[i]!r} fully missing; mean baseline falls back to 0"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    return np.where(obs, w.values, means[:, None])


def baseline_zero(w: TimeSeriesWindow) -> np.ndarray:
    return np.where(w.mask.astype(bool), w.values, 0.0)


@dataclass
class ImputationReport:
    method: str
    mask_rate: float
    seed: int
    flags: dict
    mse: float
    mae: float
    window_mse: list[float] = field(default_factory=list)
    window_mae: list[float] = field(default_factory=list)
    seconds: float = 0.0
    scale: str = "raw"

    def sort_key(self):
        f = self.flags
        return (self.mask_rate, self.seed, self.method, f.get("multi_scale"), f.get("clustering"), f.get("grouping"))

    def to_dict(self) -> dict:
        return asdict(self)


def score_windows(preds, truths, eval_masks) -> tuple[float, float, list[float], list[float]]:
    """Aggregate metrics pool all scored cells; per-window values are reported alongside."""
    per = [metrics(p, g, m) if m.any() else (float("nan"), float("nan"))
           for p, g, m in zip(preds, truths, eval_masks)]
    sel = [m.astype(bool) for m in eval_masks]
    err = np.concatenate([(p - g)[s] for p, g, s in zip(preds, truths, sel)])
    if err.size == 0:
        raise EmptyMaskSet("no cells to score")
    return float(np.mean(err * err)), float(np.mean(np.abs(err))), [a for a, _ in per], [b for _, b in per]


@dataclass
class BenchmarkCase:
    """One dataset split into windows plus an evaluation mask per window."""

    truth: list[TimeSeriesWindow]
    masked: list[TimeSeriesWindow]
    eval_masks: list[np.ndarray]
    series: TimeSeriesWindow


def prepare_case(series: TimeSeriesWindow, window: int, stride: int, rate: float, seed: int) -> BenchmarkCase:
    """Mask the full series once, then slice windows; identical seeds give identical masks."""
    masked_series, eval_mask = apply_random_mask(series, rate, seed)
    truth = make_windows(series, window, stride)
    masked = make_windows(masked_series, window, stride)
    full_eval = TimeSeriesWindow(np.zeros_like(series.values), eval_mask)
    evals = [w.mask for w in make_windows(full_eval, window, stride)]
    return BenchmarkCase(truth, masked, evals, masked_series)


def _to_scale(grids, windows, scale):
    if scale == "raw":
        return grids
    out = []
    for g, w in zip(grids, windows):
        _, stats = standardize(w)
        out.append((g - stats.mean[:, None]) / stats.std[:, None])
    return out


def evaluate_method(method: str, case: BenchmarkCase, model: ImputeINR | None = None, scale: str = "raw"):
    if method == "ImputeINR":
        preds = [model.impute(w) for w in case.masked]
    elif method == "Mean":
        preds = [baseline_mean(w) for w in case.masked]
    elif method == "Zero":
        preds = [baseline_zero(w) for w in case.masked]
    else:
        raise ValueError(f"unknown method {method!r}")
    truths = [w.values for w in case.truth]
    # standardized scale uses each masked window's observed statistics
    preds = _to_scale(preds, case.masked, scale)
    truths = _to_scale(truths, case.masked, scale)
    return score_windows(preds, truths, case.eval_masks)


def fit_model(cfg: ModelConfig, case: BenchmarkCase, train_cfg: TrainConfig) -> tuple[ImputeINR, list]:
    model = ImputeINR.build(cfg, case.series, seed=train_cfg.seed)
    result = train(model, case.masked, train_cfg)
    return model, result.curve


def ablation_grid(base: ModelConfig) -> list[ModelConfig]:
    """All 8 on/off combinations of (multi-scale, clustering, grouping)."""
    return [replace(base, multi_scale=a, clustering=b, grouping=c)
            for a, b, c in itertools.product((False, True), repeat=3)]


def run_benchmark(series: TimeSeriesWindow, rates, seeds, configs, train_cfg: TrainConfig,
                  window: int = 96, stride: int | None = None, baselines: bool = True,
                  scale: str = "raw") -> list[ImputationReport]:
    """Mask, train, impute and score every (rate, seed, config) cell."""
    if any(not 0.0 <= r <= 1.0 for r in rates):
        raise ValueError("mask rates must lie in [0, 1]")
    stride = stride or window
    reports = []
    for rate in rates:
        for seed in seeds:
            case = prepare_case(series, window, stride, rate, seed)
            if baselines:
                for method in ("Mean", "Zero"):
                    t0 = time.perf_counter()
                    mse, mae, wm, wa = evaluate_method(method, case, scale=scale)
                    reports.append(ImputationReport(method, rate, seed, {}, mse, mae, wm, wa,
                                                    time.perf_counter() - t0, scale))
            for cfg in configs:
                t0 = time.perf_counter()
                model, _ = fit_model(cfg, case, replace(train_cfg, seed=seed))
                mse, mae, wm, wa = evaluate_method("ImputeINR", case, model, scale)
                flags = dict(zip(("multi_scale", "clustering", "grouping"), cfg.flags))
                reports.append(ImputationReport("ImputeINR", rate, seed, flags, mse, mae, wm, wa,
                                                time.perf_counter() - t0, scale))
    return sorted(reports, key=ImputationReport.sort_key)


def method_label(r: ImputationReport) -> str:
    if not r.flags:
        return r.method
    if all(r.flags.values()):
        return r.method
    off = [k for k, v in r.flags.items() if not v]
    return f"{r.method}[no-{'+'.join(off)}]"


def write_reports_json(path, reports: list[ImputationReport], extra: dict | None = None,
                       timings_path=None) -> None:
    """Reports without wall-clock fields, so identical runs give identical bytes.

    Timings go to ``timings_path`` when given.
    """
    rows = []
    for r in reports:
        d = r.to_dict()
        d.pop("seconds")
        rows.append(d)
    doc = {"schema_version": REPORT_SCHEMA,
           "metrics_scale": reports[0].scale if reports else "raw",
           "reports": rows}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    if timings_path is not None:
        timings = [{"method": method_label(r), "mask_rate": r.mask_rate, "seed": r.seed, "seconds": r.seconds}
                   for r in reports]
        Path(timings_path).write_text(json.dumps(timings, indent=2), encoding="utf-8")


def write_summary_csv(path, reports: list[ImputationReport]) -> None:
    """Rows = mask rates, columns = <method>_MSE / <method>_MAE averaged over seeds."""
    rates = sorted({r.mask_rate for r in reports})
    labels = []
    for r in reports:
        if method_label(r) not in labels:
            labels.append(method_label(r))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mask_rate"] + [f"{lab}_{m}" for lab in labels for m in ("MSE", "MAE")])
        for rate in rates:
            row = [f"{rate:g}"]
            for lab in labels:
                cell = [r for r in reports if r.mask_rate == rate and method_label(r) == lab]
                row += [f"{np.mean([r.mse for r in cell]):.6g}", f"{np.mean([r.mae for r in cell]):.6g}"] \
                    if cell else ["", ""]
            w.writerow(row)
