"""Minimal dependency-free SVG line charts."""

from typing import Dict, Sequence

import numpy as np

COLORS = ("#1f77b4", "#2ca02c", "#d62728", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

WIDTH, PANEL_HEIGHT, MARGIN = 640, 240, 48


def _panel(times: np.ndarray, series: Dict[str, Sequence[float]], top: float, title: str) -> list:
    x0, x1 = MARGIN, WIDTH - MARGIN
    y0, y1 = top + PANEL_HEIGHT - MARGIN / 2, top + MARGIN / 2
    data = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    lo = min([0.0] + [float(np.min(v)) for v in data.values() if len(v)])
    hi = max([1e-12] + [float(np.max(v)) for v in data.values() if len(v)])
    t_lo, t_hi = float(times[0]), float(times[-1]) if times[-1] > times[0] else float(times[0]) + 1.0

    def sx(t):
        return x0 + (t - t_lo) / (t_hi - t_lo) * (x1 - x0)

    def sy(v):
        return y0 - (v - lo) / (hi - lo) * (y0 - y1)

    out = [
        f'<rect x="{x0}" y="{y1:.1f}" width="{x1 - x0}" height="{y0 - y1:.1f}" fill="none" stroke="black"/>',
        f'<text x="{x0}" y="{y1 - 6:.1f}" font-size="12">{title}</text>',
        f'<text x="{x0 - 4}" y="{y0:.1f}" font-size="10" text-anchor="end">{lo:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 10:.1f}" font-size="10" text-anchor="end">{hi:.3g}</text>',
        f'<text x="{x0}" y="{y0 + 14:.1f}" font-size="10">{t_lo:.3g}</text>',
        f'<text x="{x1}" y="{y0 + 14:.1f}" font-size="10" text-anchor="end">{t_hi:.3g}</text>',
    ]
    for i, (name, values) in enumerate(data.items()):
        color = COLORS[i % len(COLORS)]
        points = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(times, values))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{points}"/>')
        out.append(
            f'<text x="{x1 + 4}" y="{y1 + 12 * (i + 1):.1f}" font-size="9" fill="{color}">{name}</text>'
        )
    return out


def write_svg(path, times, top_series: Dict[str, Sequence[float]], bottom_series: Dict[str, Sequence[float]]) -> None:
    """Two stacked panels sharing the time axis."""
    times = np.asarray(times, dtype=float)
    height = 2 * PANEL_HEIGHT
    body = _panel(times, top_series, 0.0, "OSES values") + _panel(
        times, bottom_series, PANEL_HEIGHT, "measures"
    )
    svg = "\n".join(
        [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH + 40}" height="{height}">']
        + body
        + ["</svg>", ""]
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
