"""Minimal standalone SVG line chart."""

from __future__ import annotations

from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _thin(xs, ys, max_points):
    if len(xs) <= max_points:
        return list(xs), list(ys)
    step = (len(xs) - 1) / (max_points - 1)
    idx = sorted({round(i * step) for i in range(max_points)})
    return [xs[i] for i in idx], [ys[i] for i in idx]


def line_chart(xs, series, title="", x_label="t", y_label="", width=800, height=480, max_points=2000):
    """Render ``series`` (name -> y values sharing ``xs``) as an SVG document string."""
    xs = [float(x) for x in xs]
    left, right, top, bottom = 80, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom
    all_y = [float(y) for ys in series.values() for y in ys]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(all_y), max(all_y)) if all_y else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for tx in _ticks(x0, x1):
        out.append(f'<line x1="{sx(tx):.2f}" y1="{top + ph}" x2="{sx(tx):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(tx):.2f}" y="{top + ph + 18}" text-anchor="middle">{tx:.4g}</text>')
    for ty in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{sy(ty):.2f}" x2="{left}" y2="{sy(ty):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{sy(ty) + 4:.2f}" text-anchor="end">{ty:.3g}</text>')
    if y0 < 0.0 < y1:
        out.append(f'<line x1="{left}" y1="{sy(0.0):.2f}" x2="{left + pw}" y2="{sy(0.0):.2f}" '
                   f'stroke="#999" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.1f})">{escape(y_label)}</text>')
    for i, (name, ys) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        px, py = _thin(xs, [float(y) for y in ys], max_points)
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(px, py))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        ly = top + 16 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 36}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 42}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
