"""Minimal self-contained SVG line plots for result tables.

Plots are conveniences generated from already-written tables; nothing in
the numeric pipeline reads them back.
"""

from __future__ import annotations

import math

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 55
_COLORS = ("#1f6fb2", "#c44e52", "#55a868", "#8172b2", "#937860")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    x = start
    while x <= hi + 1e-12 * span:
        out.append(round(x, 12))
        x += step
    return out


def _fmt(x: float) -> str:
    if x == 0:
        return "0"
    if abs(x) >= 1e4 or abs(x) < 1e-3:
        return f"{x:.1e}"
    return f"{x:.4g}"


def line_plot(path: str, series, title: str = "", xlabel: str = "",
              ylabel: str = "", log_x: bool = False):
    """Write a line plot; series is a list of (label, xs, ys, errs-or-None).

    Error bars are drawn as vertical whiskers when provided.
    """
    def tx(x):
        return math.log10(x) if log_x else x

    xs_all, ys_all = [], []
    for _, xs, ys, errs in series:
        xs_all.extend(tx(x) for x in xs)
        if errs is None:
            ys_all.extend(ys)
        else:
            ys_all.extend(y + e for y, e in zip(ys, errs))
            ys_all.extend(y - e for y, e in zip(ys, errs))
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.06 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return _ML + (tx(x) - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(y):
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
        f'height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    # axes
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
                 f'height="{_H - _MT - _MB}" fill="none" stroke="#444"/>')
    for yt in _ticks(y_lo, y_hi):
        yy = py(yt)
        parts.append(f'<line x1="{_ML}" y1="{yy:.1f}" x2="{_W - _MR}" '
                     f'y2="{yy:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{_ML - 6}" y="{yy + 4:.1f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{_fmt(yt)}</text>')
    raw_ticks = _ticks(x_lo, x_hi)
    for xt in raw_ticks:
        xx = _ML + (xt - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)
        label = _fmt(10 ** xt) if log_x else _fmt(xt)
        parts.append(f'<line x1="{xx:.1f}" y1="{_MT}" x2="{xx:.1f}" '
                     f'y2="{_H - _MB}" stroke="#eee"/>')
        parts.append(f'<text x="{xx:.1f}" y="{_H - _MB + 16}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H / 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>')

    for i, (label, xs, ys, errs) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        for j, (x, y) in enumerate(zip(xs, ys)):
            parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" '
                         f'r="2.5" fill="{color}"/>')
            if errs is not None:
                parts.append(
                    f'<line x1="{px(x):.1f}" y1="{py(y - errs[j]):.1f}" '
                    f'x2="{px(x):.1f}" y2="{py(y + errs[j]):.1f}" '
                    f'stroke="{color}"/>')
        parts.append(f'<text x="{_W - _MR - 8}" y="{_MT + 16 + 14 * i}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11" fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
