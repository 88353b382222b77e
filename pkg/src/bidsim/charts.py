"""Static SVG bar charts with standard-error whiskers, written without a plotting library."""

from __future__ import annotations

from html import escape
from typing import Sequence

from .dataset import STRATEGIES
from .harness import OVERALL, AggregateReport

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")
WIDTH, HEIGHT = 640, 360
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 60, 20, 50, 70


def _num(x: float) -> str:
    return format(x, ".6g")


def bar_chart_svg(
    title: str,
    categories: Sequence[str],
    series: Sequence[tuple[str, Sequence[float | None], Sequence[float | None]]],
    y_max: float,
    y_label: str = "",
) -> str:
    """Grouped bars: one group per category, one bar per series ``(label, means, sems)``.

    Missing values (None) leave a gap.  Each bar carries ``data-mean`` and
    ``data-sem`` attributes for machine checking.
    """
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    y_max = y_max if y_max > 0 else 1.0
    group_w = plot_w / max(1, len(categories))
    bar_w = group_w * 0.8 / max(1, len(series))

    def y(v: float) -> float:
        return MARGIN_TOP + plot_h * (1 - min(v, y_max) / y_max)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for k in range(5):
        v = y_max * k / 4
        out.append(
            f'<line x1="{MARGIN_LEFT}" x2="{WIDTH - MARGIN_RIGHT}" y1="{_num(y(v))}" y2="{_num(y(v))}" stroke="#dddddd"/>'
        )
        out.append(f'<text x="{MARGIN_LEFT - 6}" y="{_num(y(v) + 4)}" text-anchor="end">{_num(v)}</text>')
    if y_label:
        cy = MARGIN_TOP + plot_h / 2
        out.append(
            f'<text x="14" y="{_num(cy)}" text-anchor="middle" transform="rotate(-90 14 {_num(cy)})">{escape(y_label)}</text>'
        )
    for s, (label, means, sems) in enumerate(series):
        color = PALETTE[s % len(PALETTE)]
        for c, category in enumerate(categories):
            mean = means[c]
            if mean is None:
                continue
            sem = sems[c]
            x0 = MARGIN_LEFT + c * group_w + group_w * 0.1 + s * bar_w
            top = y(mean)
            out.append(
                f'<rect class="bar" x="{_num(x0)}" y="{_num(top)}" width="{_num(bar_w)}" '
                f'height="{_num(MARGIN_TOP + plot_h - top)}" fill="{color}" '
                f'data-series="{escape(label)}" data-category="{escape(category)}" '
                f'data-mean="{_num(mean)}" data-sem="{"" if sem is None else _num(sem)}"/>'
            )
            if sem:
                cx = x0 + bar_w / 2
                lo, hi = y(max(mean - sem, 0.0)), y(mean + sem)
                out.append(f'<line x1="{_num(cx)}" x2="{_num(cx)}" y1="{_num(lo)}" y2="{_num(hi)}" stroke="#222222"/>')
                for yy in (lo, hi):
                    out.append(
                        f'<line x1="{_num(cx - bar_w / 4)}" x2="{_num(cx + bar_w / 4)}" '
                        f'y1="{_num(yy)}" y2="{_num(yy)}" stroke="#222222"/>'
                    )
    for c, category in enumerate(categories):
        cx = MARGIN_LEFT + (c + 0.5) * group_w
        out.append(f'<text x="{_num(cx)}" y="{HEIGHT - MARGIN_BOTTOM + 16}" text-anchor="middle">{escape(category)}</text>')
    if len(series) > 1:
        for s, (label, _, _) in enumerate(series):
            lx = MARGIN_LEFT + s * 110
            ly = HEIGHT - 22
            out.append(f'<rect x="{lx}" y="{ly - 9}" width="10" height="10" fill="{PALETTE[s % len(PALETTE)]}"/>')
            out.append(f'<text x="{lx + 14}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


_TITLES = {
    "success": "Malicious reviewer success rate",
    "counting": "Counting detection",
    "ring": "Ring detection",
    "lowrank": "Low-rank detection",
}


def report_charts(report: AggregateReport) -> dict[str, str]:
    """One chart per metric family, keyed by file name."""
    rows = report.rows
    real = all(r.group_size is None for r in rows)
    charts = {}
    metrics = []
    for r in rows:
        if r.metric not in metrics:
            metrics.append(r.metric)
    for metric in metrics:
        if real and metric.startswith("normalized_rank_"):
            continue
        if not real and metric.startswith("rank_"):
            continue
        subset = [r for r in rows if r.metric == metric]
        present = {r.strategy for r in subset}
        categories = [s for s in list(STRATEGIES) + [OVERALL] if s in present]
        sizes = sorted({r.group_size for r in subset if r.group_size is not None})
        ns = sorted({r.n for r in subset})
        if real:
            keys = [(None, ns[0])] if len(ns) == 1 else [(None, n) for n in ns]
        else:
            keys = [(g, n) for g in sizes for n in ns]

        def series_label(g, n):
            if real:
                return f"n={n}"
            if len(ns) == 1:
                return f"group size {g}"
            if len(sizes) == 1:
                return f"n={n}"
            return f"size {g}, n={n}"

        series = []
        for g, n in keys:
            lookup = {r.strategy: r for r in subset if r.group_size == g and r.n == n}
            series.append(
                (
                    series_label(g, n),
                    [lookup[c].mean if c in lookup else None for c in categories],
                    [lookup[c].sem if c in lookup else None for c in categories],
                )
            )
        family = "success" if metric == "success" else metric.rsplit("_", 1)[1]
        if metric == "success":
            y_max, y_label = 1.0, "success rate"
        elif metric.startswith("normalized_rank_"):
            y_max, y_label = 1.0, "normalized rank"
        else:
            y_max, y_label = float(max(ns) - 1), "rank"
        charts[f"{metric}.svg"] = bar_chart_svg(_TITLES[family], categories, series, y_max, y_label)
    return charts
