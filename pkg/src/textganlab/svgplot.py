"""Small deterministic SVG line-chart emitter.

No timestamps, no randomness, fixed canvas and palette, and all numbers
formatted through one helper, so identical inputs give identical bytes.
Non-finite points are dropped from polylines (they would otherwise poison
the path); series with no finite points are skipped entirely.
"""
from __future__ import annotations

import math

WIDTH = 720
HEIGHT = 420
MARGIN_L = 64
MARGIN_R = 16
MARGIN_T = 34
MARGIN_B = 46
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
TICKS = 5


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _coord(x: float) -> str:
    return f"{x:.2f}"


def _finite_points(xs, ys):
    return [(float(x), float(y)) for x, y in zip(xs, ys)
            if math.isfinite(float(x)) and math.isfinite(float(y))]


def _span(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def line_chart(series, title: str = "", x_label: str = "", y_label: str = "") -> str:
    """series: iterable of (label, xs, ys).  Returns SVG text."""
    drawn = []
    for label, xs, ys in series:
        pts = _finite_points(xs, ys)
        if pts:
            drawn.append((str(label), pts))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    if title:
        parts.append(f'<text x="{WIDTH // 2}" y="20" font-family="monospace" '
                     f'font-size="14" text-anchor="middle">{_esc(title)}</text>')

    if not drawn:
        parts.append(f'<text x="{WIDTH // 2}" y="{HEIGHT // 2}" font-family="monospace" '
                     f'font-size="12" text-anchor="middle">no finite data</text>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    x_lo, x_hi = _span([p[0] for _, pts in drawn for p in pts])
    y_lo, y_hi = _span([p[1] for _, pts in drawn for p in pts])

    def sx(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    for i in range(TICKS):
        f = i / (TICKS - 1)
        xv = x_lo + f * (x_hi - x_lo)
        yv = y_lo + f * (y_hi - y_lo)
        gx, gy = sx(xv), sy(yv)
        parts.append(f'<line x1="{_coord(gx)}" y1="{MARGIN_T}" x2="{_coord(gx)}" '
                     f'y2="{HEIGHT - MARGIN_B}" stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<line x1="{MARGIN_L}" y1="{_coord(gy)}" x2="{WIDTH - MARGIN_R}" '
                     f'y2="{_coord(gy)}" stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_coord(gx)}" y="{HEIGHT - MARGIN_B + 16}" font-family="monospace" '
                     f'font-size="10" text-anchor="middle">{_fmt(xv)}</text>')
        parts.append(f'<text x="{MARGIN_L - 6}" y="{_coord(gy + 3)}" font-family="monospace" '
                     f'font-size="10" text-anchor="end">{_fmt(yv)}</text>')

    parts.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
                 f'fill="none" stroke="#333333" stroke-width="1"/>')

    for idx, (label, pts) in enumerate(drawn):
        color = PALETTE[idx % len(PALETTE)]
        coords = " ".join(f"{_coord(sx(x))},{_coord(sy(y))}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        ly = MARGIN_T + 14 + 16 * idx
        lx = WIDTH - MARGIN_R - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly}" font-family="monospace" '
                     f'font-size="11">{_esc(label)}</text>')

    if x_label:
        parts.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" font-family="monospace" '
                     f'font-size="12" text-anchor="middle">{_esc(x_label)}</text>')
    if y_label:
        parts.append(f'<text x="16" y="{HEIGHT // 2}" font-family="monospace" font-size="12" '
                     f'text-anchor="middle" transform="rotate(-90 16 {HEIGHT // 2})">'
                     f'{_esc(y_label)}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def write_svg(path, svg_text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg_text)
