"""Minimal static SVG plots: heatmaps, indicator timelines, line plots.

No external plotting dependency and no timestamps, so outputs are
byte-identical across runs of the same configuration.
"""
from __future__ import annotations

import math

import numpy as np

_HEADER = '<?xml version="1.0" encoding="UTF-8"?>\n'


def _doc(width, height, body, comment=None):
    parts = [_HEADER]
    if comment:
        parts.append(f"<!-- {comment} -->\n")
    parts.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
                 f'height="{height}" viewBox="0 0 {width} {height}">\n')
    parts.append('<rect width="100%" height="100%" fill="white"/>\n')
    parts.extend(body)
    parts.append("</svg>\n")
    return "".join(parts)


def _ramp(v):
    """Simple white -> blue -> red color ramp for v in [0, 1]."""
    v = min(max(v, 0.0), 1.0)
    if v < 0.5:
        t = v / 0.5
        r, g, b = 255 - 80 * t, 255 - 150 * t, 255
    else:
        t = (v - 0.5) / 0.5
        r, g, b = 175 + 80 * t, 105 - 105 * t, 255 - 215 * t
    return f"rgb({int(r)},{int(g)},{int(b)})"


def heatmap(matrix, path, comment=None, title=""):
    """Cell-colored heatmap; row 0 is drawn at the bottom."""
    mat = np.asarray(matrix, dtype=float)
    m, ncol = mat.shape
    size = 520
    margin = 40
    cell_w = (size - 2 * margin) / ncol
    cell_h = (size - 2 * margin) / m
    top = mat.max()
    body = []
    if title:
        body.append(f'<text x="{size/2}" y="20" text-anchor="middle" '
                    f'font-size="14">{title}</text>\n')
    for i in range(m):
        for j in range(ncol):
            v = mat[i, j] / top if top > 0 else 0.0
            x = margin + j * cell_w
            y = size - margin - (i + 1) * cell_h
            body.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cell_w:.2f}" '
                        f'height="{cell_h:.2f}" fill="{_ramp(v)}"/>\n')
    body.append(f'<rect x="{margin}" y="{margin}" width="{size-2*margin}" '
                f'height="{size-2*margin}" fill="none" stroke="black"/>\n')
    with open(path, "w") as fh:
        fh.write(_doc(size, size, body, comment))


_SEVERITY_FILL = {"warning": "#ffd24d", "crisis": "#ff5544"}


def timeline(dates, values, intervals, path, comment=None, title=""):
    """Indicator series with shaded warning/crisis intervals."""
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    vmax = max(float(finite.max(initial=1.0)) * 1.05, 1.2)
    width, height = 900, 320
    ml, mr, mt, mb = 60, 20, 30, 40
    pw, ph = width - ml - mr, height - mt - mb
    T = len(dates)

    def xpos(i):
        return ml + pw * (i / max(T - 1, 1))

    def ypos(v):
        return mt + ph * (1.0 - min(v, vmax) / vmax)

    index = {d: i for i, d in enumerate(dates)}
    body = []
    if title:
        body.append(f'<text x="{width/2}" y="18" text-anchor="middle" '
                    f'font-size="14">{title}</text>\n')
    for iv in intervals:
        x0 = xpos(index[iv.start])
        x1 = xpos(index[iv.end])
        body.append(f'<rect x="{x0:.2f}" y="{mt}" width="{max(x1-x0, 1):.2f}" '
                    f'height="{ph}" fill="{_SEVERITY_FILL[iv.severity]}" '
                    f'opacity="0.6"/>\n')
    y1 = ypos(1.0)
    body.append(f'<line x1="{ml}" y1="{y1:.2f}" x2="{ml+pw}" y2="{y1:.2f}" '
                f'stroke="gray" stroke-dasharray="4 3"/>\n')
    pts = " ".join(f"{xpos(i):.2f},{ypos(v if math.isfinite(v) else vmax):.2f}"
                   for i, v in enumerate(values))
    body.append(f'<polyline points="{pts}" fill="none" stroke="black" '
                f'stroke-width="1"/>\n')
    body.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" '
                f'fill="none" stroke="black"/>\n')
    for frac in (0.0, 0.5, 1.0):
        i = int(frac * (T - 1))
        body.append(f'<text x="{xpos(i):.2f}" y="{height-12}" font-size="11" '
                    f'text-anchor="middle">{dates[i]}</text>\n')
    for v in (0.0, 1.0, vmax):
        body.append(f'<text x="{ml-8}" y="{ypos(v)+4:.2f}" font-size="11" '
                    f'text-anchor="end">{v:.2f}</text>\n')
    with open(path, "w") as fh:
        fh.write(_doc(width, height, body, comment))


def line_plot(xs, ys, path, comment=None, title="", xlabel="", ylabel=""):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    width, height = 640, 400
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def xpos(v):
        return ml + pw * (v - x_lo) / (x_hi - x_lo)

    def ypos(v):
        return mt + ph * (1.0 - (v - y_lo) / (y_hi - y_lo))

    body = []
    if title:
        body.append(f'<text x="{width/2}" y="18" text-anchor="middle" '
                    f'font-size="14">{title}</text>\n')
    pts = " ".join(f"{xpos(a):.2f},{ypos(b):.2f}" for a, b in zip(xs, ys))
    body.append(f'<polyline points="{pts}" fill="none" stroke="#1040c0" '
                f'stroke-width="1.5"/>\n')
    body.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" '
                f'fill="none" stroke="black"/>\n')
    for frac in (0.0, 0.5, 1.0):
        v = x_lo + frac * (x_hi - x_lo)
        body.append(f'<text x="{xpos(v):.2f}" y="{height-28}" font-size="11" '
                    f'text-anchor="middle">{v:.4g}</text>\n')
        w = y_lo + frac * (y_hi - y_lo)
        body.append(f'<text x="{ml-8}" y="{ypos(w)+4:.2f}" font-size="11" '
                    f'text-anchor="end">{w:.4g}</text>\n')
    if xlabel:
        body.append(f'<text x="{ml+pw/2}" y="{height-8}" text-anchor="middle" '
                    f'font-size="12">{xlabel}</text>\n')
    if ylabel:
        body.append(f'<text x="16" y="{mt+ph/2}" font-size="12" '
                    f'transform="rotate(-90 16 {mt+ph/2})" '
                    f'text-anchor="middle">{ylabel}</text>\n')
    with open(path, "w") as fh:
        fh.write(_doc(width, height, body, comment))
