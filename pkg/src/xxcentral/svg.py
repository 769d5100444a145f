"""Minimal self-contained SVG line plots (axes, ticks, polylines, legend)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass
class Curve:
    x: Sequence[float]
    y: Sequence[float]
    label: str | None = None
    color: str | None = None
    width: float = 1.5
    dash: str | None = None


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    curves: list[Curve] = field(default_factory=list)
    hlines: list[float] = field(default_factory=list)
    log_y: bool = False


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _segments(xs, ys):
    """Split a curve at non-finite points."""
    seg = []
    for x, y in zip(xs, ys):
        if math.isfinite(x) and math.isfinite(y):
            seg.append((x, y))
        elif seg:
            yield seg
            seg = []
    if seg:
        yield seg


def render(plot: Plot, width: int = 720, height: int = 460) -> str:
    left, right, top, bottom = 70, 170, 40, 55
    pw, ph = width - left - right, height - top - bottom

    def ty(v):
        return math.log10(v) if plot.log_y else v

    xs = [x for c in plot.curves for x in c.x if math.isfinite(x)]
    ys = [
        ty(y) for c in plot.curves for y in c.y
        if math.isfinite(y) and (y > 0 or not plot.log_y)
    ]
    ys += [ty(h) for h in plot.hlines if not plot.log_y or h > 0]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (ty(v) - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(plot.title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(x0, x1):
        if x0 <= t <= x1:
            X = px(t)
            out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _nice_ticks(y0, y1):
        if y0 <= t <= y1:
            Y = top + (1 - (t - y0) / (y1 - y0)) * ph
            label = _fmt(10**t) if plot.log_y else _fmt(t)
            out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">{label}</text>')
    out.append(
        f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(plot.xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2})">{escape(plot.ylabel)}</text>'
    )
    for h in plot.hlines:
        if plot.log_y and h <= 0:
            continue
        Y = py(h)
        out.append(
            f'<line x1="{left}" y1="{Y:.2f}" x2="{left + pw}" y2="{Y:.2f}" '
            'stroke="#999" stroke-dasharray="4 3"/>'
        )

    legend = []
    for i, c in enumerate(plot.curves):
        color = c.color or PALETTE[i % len(PALETTE)]
        dash = f' stroke-dasharray="{c.dash}"' if c.dash else ""
        for seg in _segments(c.x, c.y):
            if plot.log_y:
                seg = [(x, y) for x, y in seg if y > 0]
            if not seg:
                continue
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in seg)
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="{c.width}"{dash}/>'
            )
        if c.label:
            legend.append((c.label, color, dash))
    for i, (label, color, dash) in enumerate(legend):
        Y = top + 12 + 18 * i
        X = left + pw + 12
        out.append(f'<line x1="{X}" y1="{Y}" x2="{X + 22}" y2="{Y}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{X + 28}" y="{Y + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
