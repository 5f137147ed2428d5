"""Minimal self-contained SVG line charts.

Only what the experiment outputs need: several polylines on shared axes,
optional log-scaled y, tick labels, a legend. Non-finite points split a
series into separate segments.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf"]


def nice_ticks(lo, hi, count=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _label(v):
    return f"{v:.3g}"


class LineChart:
    """Collects series and renders them as one SVG document.

    >>> ch = LineChart(title="demo")
    >>> ch.add([0, 1, 2], [0, 1, 4], "x^2")
    >>> ch.render().startswith("<svg")
    True
    """

    def __init__(self, title="", xlabel="", ylabel="", logy=False, width=640, height=420,
                 dashed=()):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.logy = logy
        self.width, self.height = width, height
        self.series = []
        self.dashed = set(dashed)
        self.margin = (70, 20, 40, 50)  # left, right, top, bottom

    def add(self, x, y, label="", dashed=False, ylim=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if ylim is not None:
            y = np.where((y >= ylim[0]) & (y <= ylim[1]), y, np.nan)
        if self.logy:
            y = np.where(y > 0, y, np.nan)
        self.series.append((x, y, label, dashed or label in self.dashed))

    def _bounds(self):
        xs = np.concatenate([s[0][np.isfinite(s[1])] for s in self.series] or [np.zeros(1)])
        ys = np.concatenate([s[1][np.isfinite(s[1])] for s in self.series] or [np.zeros(1)])
        xs = xs[np.isfinite(xs)]
        if xs.size == 0:
            xs = np.zeros(1)
        if ys.size == 0:
            ys = np.ones(1)
        if self.logy:
            ys = np.log10(ys)
        x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
        if x1 == x0:
            x1 = x0 + 1
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.04 * (y1 - y0)
        return x0, x1, y0 - pad, y1 + pad

    def render(self) -> str:
        left, right, top, bottom = self.margin
        w, h = self.width, self.height
        pw, ph = w - left - right, h - top - bottom
        x0, x1, y0, y1 = self._bounds()

        def px(x):
            return left + (x - x0) / (x1 - x0) * pw

        def py(y):
            if self.logy:
                y = np.log10(y)
            return top + (y1 - y) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
               f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">',
               f'<rect width="{w}" height="{h}" fill="white"/>',
               f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
        for t in nice_ticks(x0, x1):
            X = px(t)
            out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{top + ph + 16}" text-anchor="middle">{_label(t)}</text>')
        if self.logy:
            yt = [10.0**e for e in range(math.ceil(y0), math.floor(y1) + 1)]
            step = max(1, len(yt) // 8)
            yt = yt[::step]
        else:
            yt = nice_ticks(y0, y1)
        for t in yt:
            Y = py(t)
            out.append(f'<line x1="{left - 4}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 6}" y="{Y + 4:.2f}" text-anchor="end">{_label(t)}</text>')
        out.append(f'<clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath>')
        for k, (x, y, label, dashed) in enumerate(self.series):
            color = PALETTE[k % len(PALETTE)]
            ok = np.isfinite(x) & np.isfinite(y)
            # split at gaps
            breaks = np.flatnonzero(np.diff(ok.astype(int)) != 0) + 1
            for seg in np.split(np.arange(x.size), breaks):
                if seg.size == 0 or not ok[seg[0]]:
                    continue
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[seg], y[seg]))
                dash = ' stroke-dasharray="5,3"' if dashed else ""
                out.append(f'<polyline clip-path="url(#plot)" fill="none" stroke="{color}" '
                           f'stroke-width="1.2"{dash} points="{pts}"/>')
            if label:
                ly = top + 14 + 14 * k
                out.append(f'<line x1="{left + pw - 120}" y1="{ly - 4}" x2="{left + pw - 100}" '
                           f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
                out.append(f'<text x="{left + pw - 95}" y="{ly}">{escape(label)}</text>')
        if self.title:
            out.append(f'<text x="{w / 2}" y="{top - 16}" text-anchor="middle" font-size="13">'
                       f'{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{left + pw / 2}" y="{h - 10}" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
                       f'transform="rotate(-90 14 {top + ph / 2})">{escape(self.ylabel)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render())
        return path
