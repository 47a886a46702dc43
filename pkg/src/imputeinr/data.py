"""Loading, windowing, standardization and masking of multivariate series."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import EmptyDataError, ParseError, ShapeError, WindowTooLarge

MISSING_TOKENS = {"", "nan", "NaN", "NAN"}


def unit_grid(T: int) -> np.ndarray:
    if T == 1:
        return np.zeros(1)
    return np.linspace(0.0, 1.0, T)


@dataclass
class TimeSeriesWindow:
    """An N x T value grid with its observation mask (1 = observed).

    Values at missing positions are meaningless; consumers must consult
    ``mask``.  ``t_grid`` holds the normalized timestamps of the columns.
    """

    values: np.ndarray
    mask: np.ndarray
    variable_names: list[str] = field(default_factory=list)
    t_grid: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.int8)
        if self.values.ndim != 2 or self.values.shape != self.mask.shape:
            raise ShapeError(f"values {self.values.shape} and mask {self.mask.shape} differ")
        if not np.isin(self.mask, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        if not self.variable_names:
            self.variable_names = [f"v{i + 1}" for i in range(self.values.shape[0])]
        if len(self.variable_names) != self.values.shape[0]:
            raise ShapeError("one variable name per row required")
        if self.t_grid is None:
            self.t_grid = unit_grid(self.values.shape[1])
        self.t_grid = np.asarray(self.t_grid, dtype=np.float64)

    @property
    def n_vars(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "TimeSeriesWindow":
        return TimeSeriesWindow(self.values.copy(), self.mask.copy(),
                                list(self.variable_names), self.t_grid.copy())


@dataclass
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def invert(self, grid: np.ndarray) -> np.ndarray:
        return grid * self.std[:, None] + self.mean[:, None]


def load_csv(path) -> TimeSeriesWindow:
    """Read a header + one-row-per-timestamp CSV; empty or NaN cells are missing."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise EmptyDataError(f"{path}: no header")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not header or not body:
        raise EmptyDataError(f"{path}: zero variables or zero rows")
    n = len(header)
    values = np.zeros((n, len(body)))
    mask = np.ones((n, len(body)), dtype=np.int8)
    for t, row in enumerate(body):
        if len(row) != n:
            raise ParseError(f"expected {n} cells, found {len(row)}", row=t + 1)
        for i, cell in enumerate(row):
            cell = cell.strip()
            if cell in MISSING_TOKENS:
                values[i, t] = np.nan
                mask[i, t] = 0
                continue
            try:
                values[i, t] = float(cell)
            except ValueError:
                raise ParseError(f"column {i}: cannot parse {cell!r}", row=t + 1) from None
            if not math.isfinite(values[i, t]):
                values[i, t] = np.nan
                mask[i, t] = 0
    return TimeSeriesWindow(values, mask, header)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path, grid: np.ndarray, names, mask: np.ndarray | None = None):
    """Write an N x T grid as header + one row per timestamp.

    Cells with ``mask == 0`` are written empty.
    """
    grid = np.asarray(grid)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for t in range(grid.shape[1]):
            w.writerow([
                "" if mask is not None and not mask[i, t] else _fmt(grid[i, t])
                for i in range(grid.shape[0])
            ])


def write_mask_csv(path, mask: np.ndarray, names):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for t in range(mask.shape[1]):
            w.writerow([str(int(mask[i, t])) for i in range(mask.shape[0])])


def make_windows(series: TimeSeriesWindow, window: int, stride: int) -> list[TimeSeriesWindow]:
    if window <= 0 or stride <= 0:
        raise ValueError("window and stride must be positive")
    if window > series.length:
        raise WindowTooLarge(f"window {window} exceeds series length {series.length}")
    count = (series.length - window) // stride + 1
    grid = unit_grid(window)
    return [
        TimeSeriesWindow(series.values[:, s:s + window].copy(), series.mask[:, s:s + window].copy(),
                         list(series.variable_names), grid.copy())
        for s in (k * stride for k in range(count))
    ]


def standardize(w: TimeSeriesWindow) -> tuple[TimeSeriesWindow, StandardizationStats]:
    """Z-score every variable with the population mean/std of its observed entries.

    Missing cells become 0 after scaling; constant or empty variables get std 1.
    """
    obs = w.mask.astype(bool)
    counts = obs.sum(axis=1)
    safe = np.where(obs, w.values, 0.0)
    mean = np.where(counts > 0, safe.sum(axis=1) / np.maximum(counts, 1), 0.0)
    dev = np.where(obs, w.values - mean[:, None], 0.0)
    var = (dev**2).sum(axis=1) / np.maximum(counts, 1)
    std = np.sqrt(var)
    std = np.where((counts > 0) & (std > 1e-12 * np.maximum(1.0, np.abs(mean))), std, 1.0)
    z = np.where(obs, dev / std[:, None], 0.0)
    return replace(w, values=z, mask=w.mask.copy()), StandardizationStats(mean, std)


def destandardize(w: TimeSeriesWindow, stats: StandardizationStats) -> TimeSeriesWindow:
    return replace(w, values=stats.invert(w.values), mask=w.mask.copy())


def apply_random_mask(w: TimeSeriesWindow, r: float, seed: int):
    """Hide round(r * #observed) observed cells, chosen uniformly without replacement.

    Returns the re-masked window and an eval mask marking exactly the cells
    that were hidden.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"mask rate {r} outside [0, 1]")
    flat_obs = np.flatnonzero(w.mask.ravel())
    n_hide = int(round(r * flat_obs.size))
    rng = np.random.default_rng(seed)
    hide = np.sort(rng.choice(flat_obs, size=n_hide, replace=False)) if n_hide else flat_obs[:0]
    eval_mask = np.zeros(w.mask.size, dtype=np.int8)
    eval_mask[hide] = 1
    eval_mask = eval_mask.reshape(w.mask.shape)
    masked = w.copy()
    masked.mask = (w.mask - eval_mask).astype(np.int8)
    return masked, eval_mask


def merge_imputed(original: TimeSeriesWindow, predicted: np.ndarray) -> np.ndarray:
    predicted = np.asarray(predicted, dtype=np.float64)
    if predicted.shape != original.values.shape:
        raise ShapeError(f"predicted {predicted.shape} vs original {original.values.shape}")
    return np.where(original.mask.astype(bool), original.values, predicted)


def fill_csv(src, dst, filled: np.ndarray, mask: np.ndarray) -> None:
    """Copy ``src`` to ``dst``, replacing only missing cells with values from ``filled``.

    Observed cells keep their original text, so they are byte-identical.
    """
    with Path(src).open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    with Path(dst).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rows[0])
        for t, row in enumerate(rows[1:]):
            w.writerow([cell if mask[i, t] else _fmt(filled[i, t]) for i, cell in enumerate(row)])
