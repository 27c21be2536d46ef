"""Tiny dependency-free SVG line plot for accuracy-vs-p_e curves."""

WIDTH, HEIGHT = 640, 440
MARGIN = 60

PALETTE = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f"]


def _xmap(p, p_min, p_max):
    return MARGIN + (p - p_min) / (p_max - p_min) * (WIDTH - 2 * MARGIN)


def _ymap(acc):
    return HEIGHT - MARGIN - acc * (HEIGHT - 2 * MARGIN)


def write_sweep_svg(aggregate, path: str) -> None:
    """One line per method (mean), shaded band (mean +- std) when available."""
    grid = aggregate.p_grid
    p_min, p_max = min(grid), max(grid)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    # axes
    x0, x1 = _xmap(p_min, p_min, p_max), _xmap(p_max, p_min, p_max)
    y0, y1 = _ymap(0.0), _ymap(1.0)
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for p in grid:
        x = _xmap(p, p_min, p_max)
        parts.append(f'<line x1="{x:.1f}" y1="{y0}" x2="{x:.1f}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{y0 + 20}" font-size="11" text-anchor="middle">{p:.1f}</text>')
    for a in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = _ymap(a)
        parts.append(f'<line x1="{x0 - 5}" y1="{y:.1f}" x2="{x0}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 10}" y="{y + 4:.1f}" font-size="11" text-anchor="end">{a:.2f}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle">test p_e</text>')

    for i, method in enumerate(sorted(aggregate.methods)):
        entry = aggregate.methods[method]
        color = PALETTE[i % len(PALETTE)]
        xs = [_xmap(p, p_min, p_max) for p in grid]
        if entry["std"] is not None:
            upper = [(x, _ymap(m + s)) for x, m, s in zip(xs, entry["mean"], entry["std"])]
            lower = [(x, _ymap(m - s)) for x, m, s in zip(xs, entry["mean"], entry["std"])]
            pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in upper + lower[::-1])
            parts.append(f'<polygon points="{pts}" fill="{color}" opacity="0.15"/>')
        pts = " ".join(f"{x:.1f},{_ymap(m):.1f}" for x, m in zip(xs, entry["mean"]))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = MARGIN + 16 * i
        parts.append(f'<line x1="{x1 - 150}" y1="{ly}" x2="{x1 - 130}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x1 - 124}" y="{ly + 4}" font-size="11">{method}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
