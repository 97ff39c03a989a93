"""Minimal static SVG line plots (fixed styling, no dependencies)."""
from xml.sax.saxutils import escape

import numpy as np

_W, _H, _PAD = 640, 400, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_plot(path, series, title="", xlabel="", ylabel="", hlines=(), max_points=2000):
    """Write ``series`` (a list of ``(label, x, y)``) as an SVG polyline chart."""
    xs = np.concatenate([np.asarray(x, float) for _, x, _ in series])
    ys = np.concatenate([np.asarray(y, float) for _, _, y in series] +
                        [np.asarray([v for _, v in hlines], float)])
    x0, x1 = float(np.nanmin(xs)), float(np.nanmax(xs))
    y0, y1 = float(np.nanmin(ys)), float(np.nanmax(ys))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return _PAD + (v - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def sy(v):
        return _H - _PAD - (v - y0) / (y1 - y0) * (_H - 2 * _PAD)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
             f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
             f'<text x="{_W / 2}" y="20" text-anchor="middle">{escape(title)}</text>',
             f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
             f'<text x="12" y="{_H / 2}" transform="rotate(-90 12 {_H / 2})" '
             f'text-anchor="middle">{escape(ylabel)}</text>',
             f'<text x="{_PAD}" y="{_H - _PAD + 15}" font-size="10">{x0:.4g}</text>',
             f'<text x="{_W - _PAD}" y="{_H - _PAD + 15}" font-size="10" text-anchor="end">{x1:.4g}</text>',
             f'<text x="{_PAD - 4}" y="{_H - _PAD}" font-size="10" text-anchor="end">{y0:.4g}</text>',
             f'<text x="{_PAD - 4}" y="{_PAD + 4}" font-size="10" text-anchor="end">{y1:.4g}</text>']
    for label, v in hlines:
        parts.append(f'<line x1="{_PAD}" y1="{sy(v):.2f}" x2="{_W - _PAD}" y2="{sy(v):.2f}" '
                     f'stroke="gray" stroke-dasharray="4 3"/>')
        parts.append(f'<text x="{_W - _PAD}" y="{sy(v) - 3:.2f}" font-size="10" '
                     f'text-anchor="end">{escape(label)}</text>')
    for i, (label, x, y) in enumerate(series):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        step = max(1, len(x) // max_points)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[::step], y[::step]))
        color = _COLORS[i % len(_COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
        parts.append(f'<text x="{_W - _PAD - 5}" y="{_PAD + 14 * (i + 1)}" font-size="11" '
                     f'text-anchor="end" fill="{color}">{escape(label)}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
