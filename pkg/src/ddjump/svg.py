"""Tiny SVG writer for line plots and heatmaps; CSVs stay the authoritative output."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#000000")
W, H, PAD = 640, 400, 50


def _scale(v, lo, hi, a, b):
    if hi == lo:
        return (a + b) / 2 + 0 * v
    return a + (v - lo) / (hi - lo) * (b - a)


def _frame(title, xlabel, ylabel, xlo, xhi, ylo, yhi):
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>',
           f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="14" y="{H / 2}" transform="rotate(-90 14 {H / 2})" text-anchor="middle">{escape(ylabel)}</text>']
    for v, x in ((xlo, PAD), (xhi, W - PAD)):
        out.append(f'<text x="{x}" y="{H - PAD + 14}" text-anchor="middle">{v:.4g}</text>')
    for v, y in ((ylo, H - PAD), (yhi, PAD)):
        out.append(f'<text x="{PAD - 4}" y="{y + 4}" text-anchor="end">{v:.4g}</text>')
    return out


def line_plot(series: dict, title="", xlabel="", ylabel="") -> str:
    """``series`` maps a label to ``(x, y)`` arrays."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    xlo, xhi, ylo, yhi = xs.min(), xs.max(), ys.min(), ys.max()
    out = _frame(title, xlabel, ylabel, xlo, xhi, ylo, yhi)
    for k, (label, (x, y)) in enumerate(series.items()):
        px = _scale(np.asarray(x, float), xlo, xhi, PAD, W - PAD)
        py = _scale(np.asarray(y, float), ylo, yhi, H - PAD, PAD)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        colour = PALETTE[k % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" points="{pts}"/>')
        out.append(f'<text x="{W - PAD - 4}" y="{PAD + 14 * (k + 1)}" text-anchor="end" fill="{colour}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(counts, x_edges, y_edges, title="", xlabel="", ylabel="") -> str:
    c = np.asarray(counts, float)
    out = _frame(title, xlabel, ylabel, x_edges[0], x_edges[-1], y_edges[0], y_edges[-1])
    top = np.log1p(c).max() or 1.0
    cw = (W - 2 * PAD) / c.shape[0]
    ch = (H - 2 * PAD) / c.shape[1]
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            if c[i, j] <= 0:
                continue
            level = int(255 * (1 - np.log1p(c[i, j]) / top))
            out.append(f'<rect x="{PAD + i * cw:.2f}" y="{H - PAD - (j + 1) * ch:.2f}" width="{cw:.2f}" '
                       f'height="{ch:.2f}" fill="rgb(255,{level},{level})"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
