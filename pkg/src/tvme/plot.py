"""Self-contained SVG line plot of a zeta series and its band.

No plotting library is needed: the file holds one solid polyline per
contiguous run of defined ``zeta`` values and one dashed polyline per band
edge.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["emit_plot", "render_svg"]

WIDTH, HEIGHT = 800, 360
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 50


def _segments(values):
    """Index runs where ``values`` is finite."""
    ok = np.isfinite(values)
    runs, start = [], None
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(values)))
    return runs


def _nice_ticks(vmax, n=5):
    if vmax <= 0:
        return [0.0]
    raw = vmax / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    return [i * step for i in range(int(vmax / step) + 1)]


def render_svg(series, title=None, cap=None):
    """SVG document (a string) for a :class:`~tvme.efficiency.ZetaSeries` with a band.

    ``cap`` clips the drawn values for display only.
    """
    if series.band_hi is None or series.band_lo is None:
        raise ValueError("series has no confidence band to plot")
    zeta = np.asarray(series.zeta, dtype=float)
    lo = np.asarray(series.band_lo, dtype=float)
    hi = np.asarray(series.band_hi, dtype=float)
    if cap is not None:
        zeta, lo, hi = (np.minimum(a, cap) for a in (zeta, lo, hi))
    n = zeta.size
    finite = np.concatenate([a[np.isfinite(a)] for a in (zeta, lo, hi)])
    vmax = float(finite.max()) if finite.size else 1.0
    vmax = vmax * 1.05 if vmax > 0 else 1.0

    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(i):
        return LEFT + (pw * i / (n - 1) if n > 1 else pw / 2)

    def py(v):
        return TOP + ph * (1.0 - v / vmax)

    def points(vals, idx):
        return " ".join(f"{px(i):.2f},{py(vals[i]):.2f}" for i in idx)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    # axes
    out.append(f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>')
    for v in _nice_ticks(vmax / 1.05):
        y = py(v)
        out.append(f'<line x1="{LEFT - 4}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">{v:g}</text>')
    dates = series.dates
    if n:
        for i in sorted(set(np.linspace(0, n - 1, min(n, 7)).round().astype(int))):
            label = str(dates[i]) if dates is not None else str(i)
            x = px(i)
            out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{escape(label)}</text>')
    # band edges, dashed
    for edge in (lo, hi):
        idx = np.flatnonzero(np.isfinite(edge))
        out.append(
            f'<polyline fill="none" stroke="red" stroke-width="1" stroke-dasharray="6,4" '
            f'points="{points(edge, idx)}"/>'
        )
    # zeta, solid, broken at undefined periods
    for s, e in _segments(zeta):
        out.append(
            f'<polyline fill="none" stroke="black" stroke-width="1.5" points="{points(zeta, range(s, e))}"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(series, path, title=None, cap=None):
    """Write :func:`render_svg` output to ``path``."""
    path = Path(path)
    path.write_text(render_svg(series, title, cap), encoding="utf-8")
    return path
