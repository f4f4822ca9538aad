"""Minimal static SVG line plots for metrics streams.

Hand-rolled rather than a plotting library so that identical inputs
produce byte-identical files (artifact hashes must be reproducible).
"""

from __future__ import annotations


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def svg_line_plot(
    series: dict[str, list[tuple[float, float]]],
    path: str,
    title: str = "",
    width: int = 640,
    height: int = 360,
) -> None:
    """Write one SVG with a polyline per named series."""
    pad = 48
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="20" text-anchor="middle" font-family="monospace" '
        f'font-size="13">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#333"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#333"/>',
        f'<text x="{pad}" y="{height - pad + 16}" font-family="monospace" font-size="10">{_fmt(x0)}</text>',
        f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="end" font-family="monospace" '
        f'font-size="10">{_fmt(x1)}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" font-family="monospace" '
        f'font-size="10">{_fmt(y0)}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" font-family="monospace" '
        f'font-size="10">{_fmt(y1)}</text>',
    ]
    for i, (name, pts) in enumerate(sorted(series.items())):
        color = colors[i % len(colors)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        parts.append(
            f'<text x="{width - pad}" y="{pad + 14 * i}" text-anchor="end" fill="{color}" '
            f'font-family="monospace" font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
