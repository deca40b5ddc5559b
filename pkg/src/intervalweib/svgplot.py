"""Minimal hand-rolled SVG line plots (no plotting dependency).

Just enough for reliability curves: polylines, a shaded credible band,
optional step series for Kaplan-Meier overlays, axis ticks and a legend.
Output is deterministic for identical inputs.
"""

from __future__ import annotations

import numpy as np

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 64, 16, 24, 44
_COLORS = ["#1f6fb2", "#c44e52", "#2e8b57", "#8a5fbf", "#b8860b"]


def _fmt(v):
    return f"{v:.6g}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, n)
    return raw


class SvgPlot:
    """Accumulates series, then renders one SVG document."""

    def __init__(self, title="", xlabel="", ylabel="", ylim=None):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.series = []   # (kind, x, y, extra, label)
        self.ylim = ylim

    def add_line(self, x, y, label=""):
        self.series.append(("line", np.asarray(x, float), np.asarray(y, float), None, label))

    def add_band(self, x, lo, hi, label=""):
        self.series.append(
            ("band", np.asarray(x, float), np.asarray(lo, float),
             np.asarray(hi, float), label)
        )

    def add_steps(self, x, y, label=""):
        """Right-continuous step series (survival-curve style)."""
        self.series.append(("steps", np.asarray(x, float), np.asarray(y, float), None, label))

    def _extent(self):
        xs = np.concatenate([s[1] for s in self.series]) if self.series else np.array([0, 1])
        ys = []
        for kind, x, y, extra, _ in self.series:
            ys.append(y)
            if kind == "band":
                ys.append(extra)
        ys = np.concatenate(ys) if ys else np.array([0, 1])
        x0, x1 = float(xs.min()), float(xs.max())
        if self.ylim is not None:
            y0, y1 = self.ylim
        else:
            y0, y1 = float(ys.min()), float(ys.max())
            pad = 0.05 * max(y1 - y0, 1e-9)
            y0, y1 = y0 - pad, y1 + pad
        if x1 <= x0:
            x1 = x0 + 1.0
        if y1 <= y0:
            y1 = y0 + 1.0
        return x0, x1, y0, y1

    def render(self):
        x0, x1, y0, y1 = self._extent()
        iw = _W - _ML - _MR
        ih = _H - _MT - _MB

        def sx(x):
            return _ML + (x - x0) / (x1 - x0) * iw

        def sy(y):
            return _MT + (y1 - y) / (y1 - y0) * ih

        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
        ]
        for tx in _ticks(x0, x1):
            px = sx(tx)
            parts.append(
                f'<line x1="{px:.2f}" y1="{_MT + ih}" x2="{px:.2f}" '
                f'y2="{_MT + ih + 4}" stroke="#444"/>'
            )
            parts.append(
                f'<text x="{px:.2f}" y="{_MT + ih + 18}" font-size="11" '
                f'text-anchor="middle" fill="#222">{_fmt(tx)}</text>'
            )
        for ty in _ticks(y0, y1):
            py = sy(ty)
            parts.append(
                f'<line x1="{_ML - 4}" y1="{py:.2f}" x2="{_ML}" y2="{py:.2f}" stroke="#444"/>'
            )
            parts.append(
                f'<text x="{_ML - 8}" y="{py + 4:.2f}" font-size="11" '
                f'text-anchor="end" fill="#222">{_fmt(ty)}</text>'
            )
        parts.append(
            f'<rect x="{_ML}" y="{_MT}" width="{iw}" height="{ih}" fill="none" stroke="#444"/>'
        )
        color_i = 0
        legend = []
        for kind, x, y, extra, label in self.series:
            color = _COLORS[color_i % len(_COLORS)]
            if kind == "band":
                pts = [f"{sx(xx):.2f},{sy(yy):.2f}" for xx, yy in zip(x, y)]
                pts += [f"{sx(xx):.2f},{sy(yy):.2f}" for xx, yy in zip(x[::-1], extra[::-1])]
                parts.append(
                    f'<polygon points="{" ".join(pts)}" fill="{color}" '
                    f'fill-opacity="0.18" stroke="none"/>'
                )
            elif kind == "steps":
                pts = []
                for i in range(len(x)):
                    if i > 0:
                        pts.append(f"{sx(x[i]):.2f},{sy(y[i - 1]):.2f}")
                    pts.append(f"{sx(x[i]):.2f},{sy(y[i]):.2f}")
                parts.append(
                    f'<polyline points="{" ".join(pts)}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5" stroke-dasharray="5,3"/>'
                )
                color_i += 1
            else:
                pts = " ".join(f"{sx(xx):.2f},{sy(yy):.2f}" for xx, yy in zip(x, y))
                parts.append(
                    f'<polyline points="{pts}" fill="none" stroke="{color}" '
                    f'stroke-width="1.8"/>'
                )
                color_i += 1
            if label:
                legend.append((label, color, kind))
        ly = _MT + 14
        for label, color, kind in legend:
            parts.append(
                f'<line x1="{_ML + iw - 150}" y1="{ly - 4}" x2="{_ML + iw - 126}" '
                f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{_ML + iw - 120}" y="{ly}" font-size="11" fill="#222">{label}</text>'
            )
            ly += 16
        if self.title:
            parts.append(
                f'<text x="{_W / 2}" y="16" font-size="13" text-anchor="middle" '
                f'fill="#111">{self.title}</text>'
            )
        if self.xlabel:
            parts.append(
                f'<text x="{_ML + iw / 2}" y="{_H - 8}" font-size="12" '
                f'text-anchor="middle" fill="#111">{self.xlabel}</text>'
            )
        if self.ylabel:
            parts.append(
                f'<text x="14" y="{_MT + ih / 2}" font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 14 {_MT + ih / 2})" fill="#111">{self.ylabel}</text>'
            )
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
