"""Minimal SVG line and scatter charts (no plotting dependency)."""
from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = {"R": "#d62728", "G": "#2ca02c", "B": "#1f77b4"}
_FALLBACK = ("#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 60, 110, 30, 50


def _fmt(v):
    return f"{v:.2f}"


def _axes(x_lo, x_hi, y_lo, y_hi, title, xlabel, ylabel):
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return TOP + ph - (y - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(5):
        xv = x_lo + (x_hi - x_lo) * i / 4
        yv = y_lo + (y_hi - y_lo) * i / 4
        parts.append(f'<text x="{_fmt(sx(xv))}" y="{TOP + ph + 16}" text-anchor="middle">{xv:.3g}</text>')
        parts.append(f'<text x="{LEFT - 6}" y="{_fmt(sy(yv) + 4)}" text-anchor="end">{yv:.3g}</text>')
    parts.append(f'<text x="{LEFT + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text x="14" y="{TOP + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {TOP + ph / 2})">{escape(ylabel)}</text>')
    return parts, sx, sy


def _colour(name, i):
    return PALETTE.get(name, _FALLBACK[i % len(_FALLBACK)])


def _legend(parts, names):
    for i, name in enumerate(names):
        y = TOP + 14 + 18 * i
        parts.append(f'<rect x="{W - RIGHT + 12}" y="{y - 9}" width="12" height="10" fill="{_colour(name, i)}"/>')
        parts.append(f'<text x="{W - RIGHT + 30}" y="{y}">{escape(name)}</text>')


def line_chart(x, series, title="", xlabel="", ylabel="", y_range=None):
    """``series`` maps a name to y values aligned with ``x``. Returns SVG text."""
    ys = [v for s in series.values() for v in s]
    y_lo, y_hi = y_range if y_range else (min(ys), max(ys))
    parts, sx, sy = _axes(min(x), max(x), y_lo, y_hi, title, xlabel, ylabel)
    for i, (name, vals) in enumerate(series.items()):
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x, vals))
        parts.append(f'<polyline fill="none" stroke="{_colour(name, i)}" stroke-width="1.5" points="{pts}"/>')
    _legend(parts, list(series))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_chart(groups, title="", xlabel="", ylabel=""):
    """``groups`` maps a name to a list of (x, y) points."""
    pts = [p for g in groups.values() for p in g]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    parts, sx, sy = _axes(min(xs), max(xs), min(ys), max(ys), title, xlabel, ylabel)
    for i, (name, g) in enumerate(groups.items()):
        c = _colour(name, i)
        for a, b in g:
            parts.append(f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}" r="2.5" fill="{c}"/>')
    _legend(parts, list(groups))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
