"""Barcode rendering as standalone SVG, no plotting dependency.

Bars are horizontal in loss coordinates on a linear axis; the essential
half-line gets an arrowhead at the plot's right edge, and tick labels
mark segment endpoints.
"""

from __future__ import annotations

import math

BAR_HEIGHT = 10
BAR_GAP = 8
MARGIN_LEFT = 60
MARGIN_RIGHT = 40
MARGIN_TOP = 34
MARGIN_BOTTOM = 44
PLOT_WIDTH = 560


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _collect_bars(barcode):
    bars = [(barcode.essential.birth, math.inf, True)]
    for s in sorted(barcode.segments, key=lambda s: (s.birth, s.minimum_id)):
        bars.append((s.birth, s.death, False))
    return bars


def _x_range(groups):
    vals = []
    for _, bars in groups:
        for b, d, _ in bars:
            vals.append(b)
            if math.isfinite(d):
                vals.append(d)
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.08 * (hi - lo)
    return lo - pad, hi + pad


def barcode_svg(barcode, title: str = "") -> str:
    """Render one barcode; bars sorted by birth, essential bar arrow-tipped."""
    return stacked_barcode_svg([(title, barcode)], title="")


def stacked_barcode_svg(named_barcodes, title: str = "") -> str:
    """Render several barcodes stacked in the given order on a shared axis."""
    groups = [(label, _collect_bars(bc)) for label, bc in named_barcodes]
    lo, hi = _x_range(groups)
    span = hi - lo

    def sx(v: float) -> float:
        return MARGIN_LEFT + (v - lo) / span * PLOT_WIDTH

    n_bars = sum(len(bars) for _, bars in groups)
    group_pad = 18
    height = (MARGIN_TOP + MARGIN_BOTTOM + n_bars * (BAR_HEIGHT + BAR_GAP)
              + group_pad * len(groups))
    width = MARGIN_LEFT + PLOT_WIDTH + MARGIN_RIGHT

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           '<style>text{font-family:sans-serif;font-size:10px;}'
           '.title{font-size:13px;}</style>',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text class="title" x="{width / 2:.1f}" y="18" '
                   f'text-anchor="middle">{title}</text>')

    ticks = sorted({b for _, bars in groups for b, d, _ in bars}
                   | {d for _, bars in groups for b, d, _ in bars if math.isfinite(d)})
    axis_y = height - MARGIN_BOTTOM + 12
    out.append(f'<line x1="{MARGIN_LEFT}" y1="{axis_y}" '
               f'x2="{MARGIN_LEFT + PLOT_WIDTH}" y2="{axis_y}" stroke="black"/>')
    for t in ticks:
        x = sx(t)
        out.append(f'<line x1="{x:.1f}" y1="{axis_y}" x2="{x:.1f}" '
                   f'y2="{axis_y + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{axis_y + 15}" '
                   f'text-anchor="middle">{_fmt(t)}</text>')

    y = MARGIN_TOP
    for label, bars in groups:
        if label:
            out.append(f'<text x="{MARGIN_LEFT - 52}" y="{y + 4}" '
                       f'font-weight="bold">{label}</text>')
        for birth, death, essential in bars:
            x0 = sx(birth)
            x1 = MARGIN_LEFT + PLOT_WIDTH if essential else sx(death)
            color = "#d62728" if essential else "#1f77b4"
            out.append(f'<rect x="{x0:.1f}" y="{y:.1f}" '
                       f'width="{max(x1 - x0, 1.0):.1f}" height="{BAR_HEIGHT}" '
                       f'fill="{color}"/>')
            if essential:
                tip = MARGIN_LEFT + PLOT_WIDTH + 10
                mid = y + BAR_HEIGHT / 2
                out.append(f'<polygon points="{x1:.1f},{y:.1f} {tip:.1f},{mid:.1f} '
                           f'{x1:.1f},{y + BAR_HEIGHT:.1f}" fill="{color}"/>')
            y += BAR_HEIGHT + BAR_GAP
        y += group_pad
    out.append('</svg>')
    return "\n".join(out)


def save_svg(svg: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
        if not svg.endswith("\n"):
            fh.write("\n")
