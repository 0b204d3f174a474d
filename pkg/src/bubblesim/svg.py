"""Minimal deterministic SVG charts (line, scatter, bar)."""

from __future__ import annotations

from xml.sax.saxutils import escape

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + k * step for k in range(n)]


def _bounds(values, pad=0.05):
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


class _Canvas:
    def __init__(self, title, xlabel, ylabel, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="18" y="{H / 2}" text-anchor="middle" transform="rotate(-90 18 {H / 2})">{escape(ylabel)}</text>',
            f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
            f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
        ]
        for v in _ticks(*ylim):
            y = self.y(v)
            self.parts.append(f'<line x1="{LEFT - 4}" y1="{_fmt(y)}" x2="{LEFT}" y2="{_fmt(y)}" stroke="black"/>')
            self.parts.append(f'<text x="{LEFT - 6}" y="{_fmt(y + 4)}" text-anchor="end">{v:.3g}</text>')

    def x(self, v):
        lo, hi = self.xlim
        return LEFT + (v - lo) / (hi - lo) * (W - LEFT - RIGHT)

    def y(self, v):
        lo, hi = self.ylim
        return H - BOTTOM - (v - lo) / (hi - lo) * (H - TOP - BOTTOM)

    def xticks(self, values, labels=None):
        for k, v in enumerate(values):
            x = self.x(v)
            label = labels[k] if labels else f"{v:.3g}"
            self.parts.append(f'<line x1="{_fmt(x)}" y1="{H - BOTTOM}" x2="{_fmt(x)}" y2="{H - BOTTOM + 4}" stroke="black"/>')
            self.parts.append(f'<text x="{_fmt(x)}" y="{H - BOTTOM + 18}" text-anchor="middle">{escape(str(label))}</text>')

    def legend(self, names):
        for k, name in enumerate(names):
            y = TOP + 4 + 16 * k
            color = PALETTE[k % len(PALETTE)]
            self.parts.append(f'<rect x="{W - RIGHT - 130}" y="{y}" width="10" height="10" fill="{color}"/>')
            self.parts.append(f'<text x="{W - RIGHT - 115}" y="{y + 9}">{escape(str(name))}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_chart(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """``series`` maps a name to ``(xs, ys)``."""
    xs = [x for s in series.values() for x in s[0]]
    ys = [y for s in series.values() for y in s[1]]
    c = _Canvas(title, xlabel, ylabel, _bounds(xs, 0.02), _bounds(ys))
    c.xticks(sorted(set(xs)))
    for k, (name, (sx, sy)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(c.x(a))},{_fmt(c.y(b))}" for a, b in zip(sx, sy))
        c.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in zip(sx, sy):
            c.parts.append(f'<circle cx="{_fmt(c.x(a))}" cy="{_fmt(c.y(b))}" r="3" fill="{color}"/>')
    c.legend(list(series))
    return c.render()


def scatter(points: list, title: str, xlabel: str, ylabel: str) -> str:
    """``points`` is a list of ``(x, y, label)``; consecutive points are joined."""
    xs, ys = [p[0] for p in points], [p[1] for p in points]
    c = _Canvas(title, xlabel, ylabel, _bounds(xs), _bounds(ys))
    c.xticks(_ticks(*_bounds(xs)))
    if len(points) > 1:
        pts = " ".join(f"{_fmt(c.x(a))},{_fmt(c.y(b))}" for a, b, _ in points)
        c.parts.append(f'<polyline points="{pts}" fill="none" stroke="#999" stroke-dasharray="4 3"/>')
    for a, b, label in points:
        c.parts.append(f'<circle cx="{_fmt(c.x(a))}" cy="{_fmt(c.y(b))}" r="4" fill="{PALETTE[0]}"/>')
        c.parts.append(f'<text x="{_fmt(c.x(a) + 6)}" y="{_fmt(c.y(b) - 6)}">{escape(str(label))}</text>')
    return c.render()


def bar_chart(labels: list, values: list, title: str, ylabel: str) -> str:
    n = len(labels)
    hi = max(values + [0.0])
    c = _Canvas(title, "", ylabel, (0.0, float(n)), (0.0, hi * 1.1 if hi > 0 else 1.0))
    c.xticks([k + 0.5 for k in range(n)], labels)
    for k, v in enumerate(values):
        x0, x1 = c.x(k + 0.15), c.x(k + 0.85)
        y = c.y(v)
        c.parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y)}" width="{_fmt(x1 - x0)}" height="{_fmt(c.y(0.0) - y)}" fill="{PALETTE[0]}"/>'
        )
        c.parts.append(f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(y - 4)}" text-anchor="middle">{v:.3f}</text>')
    return c.render()
