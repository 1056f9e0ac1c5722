"""Small deterministic SVG writers for histograms and profile heatmaps.

Coordinates are printed with fixed precision so the same inputs always give
the same bytes.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .harness import Histogram, ProfileGrid

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60
# the better-than-reference bar gets its own slot left of the log axis
SLOT = 50

COLORS = ("#4c72b0", "#dd8452")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _open(width=WIDTH, height=HEIGHT) -> list:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]


def _text(x, y, s, anchor="middle", size=None, rotate=None):
    extra = f' font-size="{size}"' if size else ""
    if rotate is not None:
        extra += f' transform="rotate({rotate} {_f(x)} {_f(y)})"'
    return f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{extra}>{escape(s)}</text>'


def histogram_axes(hists) -> tuple[float, float, int]:
    """Common ``(log10_lo, log10_hi, count_max)`` for a set of histograms."""
    lo, hi, cmax = math.inf, -math.inf, 1
    for h in hists:
        if len(h.edges):
            lo = min(lo, float(np.log10(h.edges[0])))
            hi = max(hi, float(np.log10(h.edges[-1])))
        counts = list(h.counts) + [h.better, h.zero_count]
        cmax = max(cmax, int(max(counts)))
    if not math.isfinite(lo):
        lo, hi = -1.0, 0.0
    return lo, hi, cmax


def histogram_svg(hists, *, title: str, xlabel: str, labels=None, better_label=None, axes=None) -> str:
    """Overlay one or more log-scale histograms on shared axes.

    ``better_label`` turns on the pooled bar at the left margin that holds
    runs ending above the reference value. ``axes`` fixes the ranges, which
    keeps paired figures on identical scales.
    """
    if isinstance(hists, Histogram):
        hists = [hists]
    labels = labels or [None] * len(hists)
    lo, hi, cmax = axes or histogram_axes(hists)
    x0 = LEFT + (SLOT if better_label else 0)
    x1 = WIDTH - RIGHT
    y0, y1 = HEIGHT - BOTTOM, TOP

    def sx(v):
        return x0 + (v - lo) / (hi - lo) * (x1 - x0)

    def sy(c):
        return y0 - c / cmax * (y0 - y1)

    out = _open()
    out.append(_text(WIDTH / 2, 22, title, size=14))
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{LEFT}" y1="{y0}" x2="{LEFT}" y2="{y1}" stroke="black"/>')
    for c in _ticks(cmax):
        out.append(f'<line x1="{LEFT - 4}" y1="{_f(sy(c))}" x2="{LEFT}" y2="{_f(sy(c))}" stroke="black"/>')
        out.append(_text(LEFT - 6, sy(c) + 4, str(c), anchor="end"))
    for k in range(math.ceil(lo), math.floor(hi) + 1):
        out.append(f'<line x1="{_f(sx(k))}" y1="{y0}" x2="{_f(sx(k))}" y2="{y0 + 4}" stroke="black"/>')
        out.append(_text(sx(k), y0 + 16, f"1e{k}"))
    out.append(_text((x0 + x1) / 2, HEIGHT - 22, xlabel))
    out.append(_text(18, (y0 + y1) / 2, "runs", rotate=-90))
    if better_label:
        out.append(_text(LEFT + SLOT / 2, y0 + 16, "better", size=9))
    opacity = "1" if len(hists) == 1 else "0.55"
    for h, label, color in zip(hists, labels, COLORS):
        for a, b, c in zip(h.edges[:-1], h.edges[1:], h.counts):
            if c:
                xa, xb = sx(math.log10(a)), sx(math.log10(b))
                out.append(f'<rect x="{_f(xa)}" y="{_f(sy(c))}" width="{_f(xb - xa)}" '
                           f'height="{_f(y0 - sy(c))}" fill="{color}" fill-opacity="{opacity}"/>')
        if better_label and h.better:
            out.append(f'<rect x="{LEFT + 8}" y="{_f(sy(h.better))}" width="{SLOT - 16}" '
                       f'height="{_f(y0 - sy(h.better))}" fill="{color}" fill-opacity="{opacity}" '
                       f'stroke="black" stroke-dasharray="3,2"/>')
    legend = [(lab, col) for lab, col in zip(labels, COLORS) if lab]
    if better_label:
        legend.append((f"left bar: {better_label}", None))
    for i, (lab, col) in enumerate(legend):
        y = TOP + 8 + 14 * i
        if col:
            out.append(f'<rect x="{x1 - 200}" y="{y - 8}" width="10" height="10" fill="{col}"/>')
        out.append(_text(x1 - 186 if col else x1 - 200, y + 1, lab, anchor="start", size=10))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _ticks(cmax: int) -> list:
    step = 10 ** max(0, int(math.floor(math.log10(cmax))))
    if cmax / step < 3:
        step = max(1, step // 2)
    return list(range(0, cmax + 1, step))


def _ramp(t: float) -> str:
    # dark blue (low) to pale yellow (high)
    lo, hi = (37, 52, 148), (255, 255, 204)
    r, g, b = (round(a + t * (c - a)) for a, c in zip(lo, hi))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(grid: ProfileGrid, *, title: str = "profile log-likelihood") -> str:
    """Heatmap of a profile grid; clipped cells are drawn grey."""
    vals = np.where(grid.clipped, np.nan, grid.values)
    finite = vals[np.isfinite(vals)]
    vmin, vmax = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = vmax - vmin if vmax > vmin else 1.0
    a1, a2 = grid.axis1, grid.axis2
    n1, n2 = len(a1), len(a2)
    size = 320
    x0, y0 = LEFT, TOP
    cw, ch = size / n1, size / n2
    out = _open(WIDTH, size + TOP + BOTTOM)
    out.append(_text(WIDTH / 2, 22, title, size=14))
    out.append('<g shape-rendering="crispEdges">')
    for i in range(n1):
        for j in range(n2):
            v = vals[i, j]
            fill = "#bbbbbb" if not np.isfinite(v) else _ramp((v - vmin) / span)
            # axis2 runs upward
            out.append(f'<rect x="{_f(x0 + i * cw)}" y="{_f(y0 + (n2 - 1 - j) * ch)}" '
                       f'width="{_f(cw + 0.01)}" height="{_f(ch + 0.01)}" fill="{fill}"/>')
    out.append("</g>")
    out.append(f'<rect x="{x0}" y="{y0}" width="{size}" height="{size}" fill="none" stroke="black"/>')
    j1, j2 = grid.index_pair
    yb = y0 + size
    out.append(_text(x0, yb + 16, _num(a1[0]), anchor="start"))
    out.append(_text(x0 + size, yb + 16, _num(a1[-1]), anchor="end"))
    out.append(_text(x0 + size / 2, yb + 30, f"gamma[{j1}]"))
    out.append(_text(x0 - 6, yb, _num(a2[0]), anchor="end"))
    out.append(_text(x0 - 6, y0 + 10, _num(a2[-1]), anchor="end"))
    out.append(_text(20, y0 + size / 2, f"gamma[{j2}]", rotate=-90))
    # color bar
    bx = x0 + size + 40
    for k in range(50):
        out.append(f'<rect x="{bx}" y="{_f(y0 + size - (k + 1) * size / 50)}" width="16" '
                   f'height="{_f(size / 50 + 0.01)}" fill="{_ramp(k / 49)}"/>')
    out.append(_text(bx + 22, y0 + 10, _num(vmax), anchor="start"))
    out.append(_text(bx + 22, yb, _num(vmin), anchor="start"))
    out.append(f'<rect x="{bx}" y="{yb + 20}" width="16" height="10" fill="#bbbbbb"/>')
    out.append(_text(bx + 22, yb + 29, f"below {_num(grid.clip_floor)}", anchor="start"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _num(x: float) -> str:
    return f"{x:.6g}"
