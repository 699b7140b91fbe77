"""Log-scale convergence plots emitted as plain SVG text.

One polyline per record, metric values clamped at a floor (default 1e-6,
below which double-precision trajectories are numerical noise), legend
taken from run labels. No plotting library is involved, so output is
byte-stable and diffable.
"""

from __future__ import annotations

import math

from .errors import PlotError
from .records import MetricRow, RunRecord

WIDTH, HEIGHT = 720, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 160, 24, 48

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)

METRIC_FIELDS = ("kl_star_pi", "kl_pi_star", "dualgap_beta", "dualgap", "residual")


def _series(rows: list[MetricRow], metric: str, floor: float) -> list[tuple[int, float]]:
    if metric not in METRIC_FIELDS:
        raise PlotError(f"unknown metric {metric!r}; choose one of {METRIC_FIELDS}")
    out = []
    for row in rows:
        v = getattr(row, metric)
        if math.isfinite(v):
            out.append((row.iter, max(v, floor)))
    return out


def render_plot(
    records: list[RunRecord],
    path: str,
    metric: str = "dualgap_beta",
    floor: float = 1e-6,
    labels: list[str] | None = None,
) -> None:
    """Write an SVG of metric-vs-iteration, one line per record."""
    if not records:
        raise PlotError("no records to plot")
    if labels is None:
        labels = [
            r.config.get("label") or r.config.get("algorithm", f"run{i}")
            for i, r in enumerate(records)
        ]
    series = [_series(r.rows, metric, floor) for r in records]
    if not any(series):
        raise PlotError("no plottable points in any record")

    xs = [x for s in series for x, _ in s]
    ys = [y for s in series for _, y in s]
    x_max = max(xs) or 1
    log_lo = math.floor(math.log10(floor))
    log_hi = math.ceil(math.log10(max(ys)))
    if log_hi <= log_lo:
        log_hi = log_lo + 1

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + plot_w * (x / x_max)

    def py(y: float) -> float:
        t = (math.log10(y) - log_lo) / (log_hi - log_lo)
        return MARGIN_T + plot_h * (1.0 - t)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="11">',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="white" stroke="black"/>',
        f'<text x="{MARGIN_L + plot_w / 2:.1f}" y="{HEIGHT - 10}" '
        f'text-anchor="middle">iteration</text>',
        f'<text x="14" y="{MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {MARGIN_T + plot_h / 2:.1f})">{metric} '
        f"(floor {floor:g})</text>",
    ]
    for k in range(log_lo, log_hi + 1):
        y = py(10.0**k)
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{y:.1f}" x2="{MARGIN_L + plot_w}" y2="{y:.1f}" '
            'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{y + 4:.1f}" text-anchor="end">1e{k}</text>'
        )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = MARGIN_L + plot_w * frac
        parts.append(
            f'<text x="{x:.1f}" y="{MARGIN_T + plot_h + 16}" '
            f'text-anchor="middle">{int(round(x_max * frac))}</text>'
        )
    for i, (s, label) in enumerate(zip(series, labels)):
        if not s:
            continue
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in s)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        ly = MARGIN_T + 16 + 16 * i
        lx = MARGIN_L + plot_w + 12
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{lx + 24}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
