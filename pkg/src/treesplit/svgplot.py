"""Hand-emitted SVG: log-log scaling plots and cell maps of partitions."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
]


def color(i):
    return PALETTE[i % len(PALETTE)]


def _svg(width, height, body, title=None):
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
    parts = [head, f'<rect width="{width}" height="{height}" fill="white"/>\n']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>\n')
    parts.extend(body)
    parts.append("</svg>\n")
    return "".join(parts)


def loglog_plot(series, title="", xlabel="n", ylabel="mean walk steps", width=640, height=440):
    """``series`` maps a label to ``(xs, ys, slope or None)``."""
    pts = [(x, y) for xs, ys, _ in series.values() for x, y in zip(xs, ys) if x > 0 and y > 0]
    if not pts:
        raise ValueError("nothing to plot")
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    if x1 == x0:
        x1 += 1
    if y1 == y0:
        y1 += 1
    left, right, top, bottom = 70, 170, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (math.log10(v) - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (math.log10(v) - y0) / (y1 - y0) * ph

    body = [f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>\n']
    for e in range(x0, x1 + 1):
        x = left + (e - x0) / (x1 - x0) * pw
        body.append(f'<line x1="{x:.1f}" y1="{top}" x2="{x:.1f}" y2="{top + ph}" stroke="#ddd"/>\n')
        body.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">1e{e}</text>\n')
    for e in range(y0, y1 + 1):
        y = top + ph - (e - y0) / (y1 - y0) * ph
        body.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>\n')
        body.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">1e{e}</text>\n')
    body.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>\n')
    body.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>\n'
    )
    for i, (label, (xs, ys, slope)) in enumerate(series.items()):
        c = color(i)
        coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys) if x > 0 and y > 0)
        body.append(f'<polyline points="{coords}" fill="none" stroke="{c}" stroke-width="2"/>\n')
        for x, y in zip(xs, ys):
            if x > 0 and y > 0:
                body.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{c}"/>\n')
        ly_ = top + 16 + 20 * i
        text = label if slope is None else f"{label}  slope {slope:.3f}"
        body.append(f'<rect x="{left + pw + 12}" y="{ly_ - 9}" width="10" height="10" fill="{c}"/>\n')
        body.append(f'<text x="{left + pw + 26}" y="{ly_}" font-family="sans-serif" font-size="11">{escape(text)}</text>\n')
    return _svg(width, height, body, title)


def cell_map(cells, labels, title="", cell=24, pad=20):
    """Colored unit squares, one per cell; ``labels[i]`` picks the color of ``cells[i]``."""
    if not cells:
        raise ValueError("no cells")
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    xmin, ymax = min(xs), max(ys)
    w = (max(xs) - xmin + 1) * cell + 2 * pad
    h = (ymax - min(ys) + 1) * cell + 2 * pad + 20
    ids = {lab: i for i, lab in enumerate(sorted(set(labels), key=str))}
    body = []
    for (x, y), lab in zip(cells, labels):
        sx = pad + (x - xmin) * cell
        sy = pad + 20 + (ymax - y) * cell
        body.append(f'<rect x="{sx}" y="{sy}" width="{cell}" height="{cell}" fill="{color(ids[lab])}" stroke="white"/>\n')
    return _svg(w, h, body, title)
