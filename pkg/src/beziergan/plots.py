"""Dependency-free SVG figures: curve grids, single outlines and line plots with bands."""
from __future__ import annotations

import math
import warnings
from pathlib import Path

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _doc(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def _polyline(points, color="black", width=1.0, fill="none"):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return f'<polyline points="{pts}" fill="{fill}" stroke="{color}" stroke-width="{width}"/>'


def _text(x, y, s, size=11, anchor="middle"):
    s = str(s).replace("&", "&amp;").replace("<", "&lt;")
    return f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{s}</text>'


def _fit_curve(curve, x0, y0, w, h, pad=6.0):
    """Map a chord-normalised outline into a w x h cell with equal axis scaling."""
    c = np.asarray(curve, dtype=np.float64)
    lo, hi = c.min(axis=0), c.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    s = min((w - 2 * pad) / span[0], (h - 2 * pad) / span[1])
    cx, cy = x0 + w / 2, y0 + h / 2
    mid = (lo + hi) / 2
    return [(cx + (x - mid[0]) * s, cy - (y - mid[1]) * s) for x, y in c]


def airfoil_svg(curve, title=None, width=480, height=200):
    body = [_polyline(_fit_curve(curve, 0, 20 if title else 0, width, height - (20 if title else 0)), width=1.5)]
    if title:
        body.append(_text(width / 2, 15, title, 13))
    return _doc(width, height, body)


def curve_grid_svg(grid, cell=(150, 70), row_labels=None, col_labels=None, title=None):
    """``grid`` is a nested list (rows of columns) of curves; ``None`` leaves a cell empty."""
    rows = len(grid)
    cols = max(len(r) for r in grid)
    left = 50 if row_labels else 0
    top = (20 if title else 0) + (16 if col_labels else 0)
    w, h = cell
    body = []
    if title:
        body.append(_text(left + cols * w / 2, 15, title, 13))
    for i, row in enumerate(grid):
        if row_labels:
            body.append(_text(left - 4, top + i * h + h / 2 + 4, row_labels[i], 10, "end"))
        for j, curve in enumerate(row):
            if curve is not None:
                body.append(_polyline(_fit_curve(curve, left + j * w, top + i * h, w, h)))
    if col_labels:
        for j, lab in enumerate(col_labels):
            body.append(_text(left + j * w + w / 2, top - 4, lab, 10))
    return _doc(left + cols * w, top + rows * h, body)


def _ticks(lo, hi, count=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def line_plot_svg(series, xlabel="", ylabel="", title=None, width=560, height=360):
    """Lines with optional shaded bands.

    ``series`` maps a label to ``(x, y)`` or ``(x, y, lower, upper)``; non-finite
    entries are skipped.
    """
    ml, mr, mt, mb = 64, 140, 30 if title else 12, 44
    pw, ph = width - ml - mr, height - mt - mb
    xs, ys = [], []
    for spec in series.values():
        x = np.asarray(spec[0], dtype=float)
        for arr in spec[1:]:
            arr = np.asarray(arr, dtype=float)
            ok = np.isfinite(arr)
            xs.append(x[ok])
            ys.append(arr[ok])
    allx = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ally = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    if allx.size == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pady = 0.05 * (y1 - y0)
    y0, y1 = y0 - pady, y1 + pady

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    body = [f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    if title:
        body.append(_text(ml + pw / 2, 18, title, 13))
    for t in _ticks(x0, x1):
        body.append(_text(px(t), mt + ph + 14, f"{t:g}", 10))
    for t in _ticks(y0, y1):
        body.append(_text(ml - 6, py(t) + 3, f"{t:.3g}", 10, "end"))
        body.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{py(t):.2f}" y2="{py(t):.2f}" stroke="#eee"/>')
    body.append(_text(ml + pw / 2, height - 8, xlabel, 11))
    body.append(f'<text x="14" y="{mt + ph / 2:.1f}" font-size="11" font-family="sans-serif" '
                f'text-anchor="middle" transform="rotate(-90 14 {mt + ph / 2:.1f})">{ylabel}</text>')
    for k, (label, spec) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        x = np.asarray(spec[0], dtype=float)
        y = np.asarray(spec[1], dtype=float)
        if len(spec) == 4:
            lo, hi = np.asarray(spec[2], dtype=float), np.asarray(spec[3], dtype=float)
            ok = np.isfinite(lo) & np.isfinite(hi)
            if ok.any():
                band = [(px(a), py(b)) for a, b in zip(x[ok], hi[ok])]
                band += [(px(a), py(b)) for a, b in zip(x[ok][::-1], lo[ok][::-1])]
                pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in band)
                body.append(f'<polygon points="{pts}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        ok = np.isfinite(y)
        body.append(_polyline([(px(a), py(b)) for a, b in zip(x[ok], y[ok])], color, 1.6))
        ly = mt + 14 + 16 * k
        body.append(f'<line x1="{ml + pw + 10}" x2="{ml + pw + 30}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        body.append(_text(ml + pw + 34, ly + 4, label, 10, "start"))
    return _doc(width, height, body)


def convergence_svg(traces, title="Optimization history"):
    """``traces`` maps a label to a (seeds, T) array of best-so-far objective values."""
    series = {}
    for label, arr in traces.items():
        a = np.asarray(arr, dtype=float)
        a = np.where(np.isfinite(a), a, np.nan)
        x = np.arange(1, a.shape[1] + 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-nan columns before a first success
            mean = np.nanmean(a, axis=0)
            std = np.nanstd(a, axis=0)
        series[label] = (x, mean, mean - std, mean + std)
    return line_plot_svg(series, "evaluations", "best objective", title)


def write_svg(path, text):
    Path(path).write_text(text)
