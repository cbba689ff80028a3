"""Static SVG forest plots of sweep results.

One plot per true hazard ratio: nine scenario cells (censor x switch) on the
x axis, one point with a vertical interval per method (mean estimated HR with
mean CI endpoints), and a dashed horizontal reference line at the true HR.
Cells that lost replicates are flagged with an x glyph over the point.

The output is self-contained XML with no external references and no
timestamps, so re-runs are byte-identical.  A machine-readable comment after
the opening tag states the exact value-to-pixel mapping:

    <!-- y-map: y_px = TOP + (ymax - value) * SCALE ... -->
"""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

from .results import Method

WIDTH = 980
HEIGHT = 500
MARGIN_LEFT = 72.0
MARGIN_RIGHT = 16.0
MARGIN_TOP = 44.0
MARGIN_BOTTOM = 140.0

METHOD_COLORS = {
    Method.ITT: "#1f77b4",
    Method.RPSFTM: "#d62728",
    Method.IPE: "#2ca02c",
    Method.CENSOR: "#9467bd",
    Method.IPCW: "#8c564b",
    Method.RF: "#e377c2",
    Method.STRAT_RPSFTM: "#ff7f0e",
    Method.EXCLUDE: "#7f7f7f",
}

METHOD_LABELS = {
    Method.ITT: "ITT",
    Method.RPSFTM: "RPSFTM",
    Method.IPE: "IPE",
    Method.CENSOR: "Censor",
    Method.IPCW: "IPCW",
    Method.RF: "RF",
    Method.STRAT_RPSFTM: "SRP",
    Method.EXCLUDE: "Exclude",
}


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def forest_svg(rows: Sequence, true_hr: float, title: str | None = None) -> str:
    """Render the grouped forest plot for one true-HR slice of MetricsRows."""
    rows = [r for r in rows if r.true_hr == true_hr]
    if not rows:
        raise ValueError(f"no rows for true_hr = {true_hr}")
    cells = sorted({(r.target_censor, r.target_switch) for r in rows})
    methods = [m for m in METHOD_COLORS if any(r.method is m for r in rows)]
    by_key = {(r.target_censor, r.target_switch, r.method): r for r in rows}

    lo = min(min(r.mean_ci_lo for r in rows), true_hr)
    hi = max(max(r.mean_ci_hi for r in rows), true_hr)
    pad = 0.05 * (hi - lo) if hi > lo else 0.1
    ymin, ymax = lo - pad, hi + pad

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    scale = plot_h / (ymax - ymin)

    def ypix(v: float) -> float:
        return MARGIN_TOP + (ymax - v) * scale

    group_w = plot_w / len(cells)

    def xpix(cell_idx: int, method_idx: int) -> float:
        return MARGIN_LEFT + group_w * cell_idx + group_w * (method_idx + 1) / (len(methods) + 1)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- y-map: y_px = {MARGIN_TOP!r} + (ymax - value) * {scale!r} ; "
        f"ymin={ymin!r} ymax={ymax!r} -->",
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    label = escape(title if title is not None else f"Estimated HR by method, true HR = {true_hr}")
    out.append(
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{label}</text>'
    )

    # axes and y ticks
    x0, x1 = MARGIN_LEFT, MARGIN_LEFT + plot_w
    y0, y1 = MARGIN_TOP, MARGIN_TOP + plot_h
    out.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" '
        f'stroke="black" stroke-width="1"/>'
    )
    out.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y1)}" x2="{_fmt(x1)}" y2="{_fmt(y1)}" '
        f'stroke="black" stroke-width="1"/>'
    )
    for k in range(6):
        v = ymin + (ymax - ymin) * k / 5
        yp = ypix(v)
        out.append(
            f'<line x1="{_fmt(x0 - 4)}" y1="{_fmt(yp)}" x2="{_fmt(x0)}" y2="{_fmt(yp)}" '
            f'stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(x0 - 8)}" y="{_fmt(yp + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{v:.2f}</text>'
        )
    out.append(
        f'<text x="16" y="{_fmt(MARGIN_TOP + plot_h / 2)}" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 16 {_fmt(MARGIN_TOP + plot_h / 2)})" '
        f'text-anchor="middle">hazard ratio</text>'
    )

    # reference line at the true HR
    ref_y = ypix(true_hr)
    out.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(ref_y)}" x2="{_fmt(x1)}" y2="{_fmt(ref_y)}" '
        f'stroke="#555555" stroke-width="1" stroke-dasharray="6,4"/>'
    )
    out.append(
        f'<text x="{_fmt(x1 - 4)}" y="{_fmt(ref_y - 5)}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11" fill="#555555">true HR = {true_hr}</text>'
    )

    # cell separators and labels
    for i, (cens, sw) in enumerate(cells):
        gx = MARGIN_LEFT + group_w * i
        if i > 0:
            out.append(
                f'<line x1="{_fmt(gx)}" y1="{_fmt(y0)}" x2="{_fmt(gx)}" y2="{_fmt(y1)}" '
                f'stroke="#dddddd" stroke-width="1"/>'
            )
        cx = gx + group_w / 2
        out.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(y1 + 18)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{cens:.0%} cens</text>'
        )
        out.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(y1 + 32)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{sw:.0%} switch</text>'
        )

    # points and intervals
    for i, cell in enumerate(cells):
        for j, method in enumerate(methods):
            row = by_key.get((cell[0], cell[1], method))
            if row is None:
                continue
            xp = xpix(i, j)
            color = METHOD_COLORS[method]
            out.append(
                f'<line x1="{_fmt(xp)}" y1="{_fmt(ypix(row.mean_ci_lo))}" '
                f'x2="{_fmt(xp)}" y2="{_fmt(ypix(row.mean_ci_hi))}" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
            out.append(
                f'<circle cx="{_fmt(xp)}" cy="{_fmt(ypix(row.mean_hr))}" r="3" '
                f'fill="{color}"/>'
            )
            if row.n_failures > 0:
                yp = ypix(row.mean_hr)
                out.append(
                    f'<path d="M {_fmt(xp - 5)} {_fmt(yp - 5)} L {_fmt(xp + 5)} {_fmt(yp + 5)} '
                    f'M {_fmt(xp - 5)} {_fmt(yp + 5)} L {_fmt(xp + 5)} {_fmt(yp - 5)}" '
                    f'stroke="black" stroke-width="1.5" fill="none">'
                    f"<title>{row.n_failures} failed replicates</title></path>"
                )

    # legend
    ly = y1 + 58
    lx = MARGIN_LEFT
    for method in methods:
        out.append(
            f'<rect x="{_fmt(lx)}" y="{_fmt(ly - 9)}" width="10" height="10" '
            f'fill="{METHOD_COLORS[method]}"/>'
        )
        text = METHOD_LABELS[method]
        out.append(
            f'<text x="{_fmt(lx + 14)}" y="{_fmt(ly)}" font-family="sans-serif" '
            f'font-size="12">{text}</text>'
        )
        lx += 14 + 9 * len(text) + 24
    out.append(
        f'<text x="{_fmt(MARGIN_LEFT)}" y="{_fmt(ly + 24)}" font-family="sans-serif" '
        f'font-size="11" fill="#555555">points: mean estimated HR; bars: mean 95% CI '
        f"endpoints; x marks cells with failed replicates</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
