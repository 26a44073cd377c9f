"""Minimal SVG line charts and boolean rasters; CSV files remain the reference output."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")
W, H, PAD = 640, 420, 50


def _scale(lo, hi, a, b):
    if hi == lo:
        hi = lo + 1.0
    return lambda v: a + (np.asarray(v, dtype=float) - lo) * (b - a) / (hi - lo)


def _frame(title, xlabel, ylabel, xlim, ylim):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2}" transform="rotate(-90 14 {H / 2})" text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for v, anchor, x, y in ((xlim[0], "start", PAD, H - PAD + 16), (xlim[1], "end", W - PAD, H - PAD + 16)):
        parts.append(f'<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3g}</text>')
    for v, y in ((ylim[0], H - PAD), (ylim[1], PAD + 4)):
        parts.append(f'<text x="{PAD - 4}" y="{y}" text-anchor="end">{v:.3g}</text>')
    return parts


def line_chart(path, series: dict, title="", xlabel="x", ylabel="", logx=False, logy=False) -> Path:
    """One polyline per ``label -> (x, y)`` entry."""
    tx = np.log10 if logx else np.asarray
    ty = np.log10 if logy else np.asarray
    xs = [tx(np.asarray(x, float)) for x, _ in series.values()]
    ys = [ty(np.asarray(y, float)) for _, y in series.values()]
    finite = lambda arrs: np.concatenate([a[np.isfinite(a)] for a in arrs])
    allx, ally = finite(xs), finite(ys)
    xlim = (float(allx.min()), float(allx.max()))
    ylim = (float(ally.min()), float(ally.max()))
    sx = _scale(*xlim, PAD, W - PAD)
    sy = _scale(*ylim, H - PAD, PAD)
    parts = _frame(title, xlabel + (" (log10)" if logx else ""), ylabel + (" (log10)" if logy else ""), xlim, ylim)
    for k, (label, x, y) in enumerate(zip(series, xs, ys)):
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(x[ok]), sy(y[ok])))
        color = PALETTE[k % len(PALETTE)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{W - PAD - 4}" y="{PAD + 14 * (k + 1)}" text-anchor="end" fill="{color}">'
                     f'{escape(str(label))}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path


def raster(path, mask, re_range, im_range, title="", vlines=()) -> Path:
    """Filled cells where ``mask[i, j]`` holds; rows follow Im(p), columns Re(p)."""
    mask = np.asarray(mask, dtype=bool)
    ny, nx = mask.shape
    sx = _scale(*re_range, PAD, W - PAD)
    sy = _scale(*im_range, H - PAD, PAD)
    cw = (W - 2 * PAD) / nx
    ch = (H - 2 * PAD) / ny
    parts = _frame(title, "Re(p)", "Im(p)", re_range, im_range)
    for i, j in zip(*np.nonzero(mask)):
        x = PAD + j * cw
        y = H - PAD - (i + 1) * ch
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" fill="#9ecae1"/>')
    for g in vlines:
        x = float(sx(g))
        parts.append(f'<line x1="{x:.2f}" y1="{PAD}" x2="{x:.2f}" y2="{H - PAD}" stroke="#d62728" stroke-dasharray="4 3"/>')
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path
