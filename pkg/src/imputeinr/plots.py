"""Tiny SVG writer for loss curves and imputation overlays (polylines + axes only)."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H, PAD = 640, 400, 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _scale(values, lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return a + (np.asarray(values, float) - lo) / span * (b - a)


def _bounds(arrays):
    vals = np.concatenate([np.asarray(a, float).ravel() for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    return float(vals.min()), float(vals.max())


def line_svg(series: dict[str, tuple], title: str = "", xlabel: str = "", ylabel: str = "",
             points: dict[str, tuple] | None = None) -> str:
    """Render named (x, y) polylines, plus optional scatter sets, as an SVG document."""
    points = points or {}
    everything = list(series.values()) + list(points.values())
    x0, x1 = _bounds([s[0] for s in everything])
    y0, y1 = _bounds([s[1] for s in everything])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="16">{escape(title)}</text>',
           f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
           f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>']
    for val, ypos in ((y0, H - PAD), (y1, PAD)):
        out.append(f'<text x="{PAD - 4}" y="{ypos}" text-anchor="end" font-size="10">{val:.4g}</text>')
    for val, xpos in ((x0, PAD), (x1, W - PAD)):
        out.append(f'<text x="{xpos}" y="{H - PAD + 14}" text-anchor="middle" font-size="10">{val:.4g}</text>')
    for i, (name, (xs, ys)) in enumerate(series.items()):
        px = _scale(xs, x0, x1, PAD, W - PAD)
        py = _scale(ys, y0, y1, H - PAD, PAD)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py) if np.isfinite(b))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - PAD + 4}" y="{PAD + 14 * i}" font-size="10" fill="{color}">{escape(name)}</text>')
    for j, (name, (xs, ys)) in enumerate(points.items()):
        color = COLORS[(len(series) + j) % len(COLORS)]
        px = _scale(xs, x0, x1, PAD, W - PAD)
        py = _scale(ys, y0, y1, H - PAD, PAD)
        out += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2" fill="{color}"/>' for a, b in zip(px, py)]
        k = len(series) + j
        out.append(f'<text x="{W - PAD + 4}" y="{PAD + 14 * k}" font-size="10" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_loss_curve(path, curve, title: str = "training loss") -> None:
    epochs = [c[0] for c in curve]
    losses = [c[1] for c in curve]
    Path(path).write_text(line_svg({"mean loss": (epochs, losses)}, title, "epoch", "loss"), encoding="utf-8")


def write_overlay(path, values: np.ndarray, mask: np.ndarray, imputed: np.ndarray, variable: int = 0,
                  name: str = "") -> None:
    """Imputed trajectory of one variable with its observed points on top."""
    t = np.arange(values.shape[1])
    obs = mask[variable].astype(bool)
    svg = line_svg({"imputed": (t, imputed[variable])}, f"imputation {name}".strip(), "t", "value",
                   points={"observed": (t[obs], values[variable][obs])})
    Path(path).write_text(svg, encoding="utf-8")
