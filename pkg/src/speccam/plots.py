"""Minimal self-contained SVG charts (800x600 viewBox, no dependencies).

Presentation only: scatter with prediction band, Bland-Altman, ROC and
learning curves.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 600
LEFT, RIGHT, TOP, BOTTOM = 80, 30, 50, 70
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = (float(xlim[0]), float(xlim[1]))
        self.y0, self.y1 = (float(ylim[0]), float(ylim[1]))
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x):
        return LEFT + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def py(self, y):
        return HEIGHT - BOTTOM - (np.asarray(y, float) - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)


def _padded(values, pad=0.05):
    v = np.concatenate([np.ravel(a) for a in values])
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo or 1.0
    return lo - pad * span, hi + pad * span


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="13">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="28" text-anchor="middle" font-size="17">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{WIDTH - LEFT - RIGHT}" height="{HEIGHT - TOP - BOTTOM}" '
        f'fill="none" stroke="black"/>',
    ]
    for t in _ticks(ax.x0, ax.x1):
        x = ax.px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{HEIGHT - BOTTOM}" x2="{_fmt(x)}" y2="{HEIGHT - BOTTOM + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{HEIGHT - BOTTOM + 20}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(ax.y0, ax.y1):
        y = ax.py(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(y)}" x2="{LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 20}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="20" y="{HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 20 {HEIGHT / 2})">{escape(ylabel)}</text>'
    )
    return out


def _polyline(ax, x, y, colour, dash=None, width=2):
    pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(ax.px(x), ax.py(y)))
    style = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="{width}"{style}/>'


def _points(ax, x, y, colour):
    return [
        f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{colour}" fill-opacity="0.6"/>'
        for a, b in zip(ax.px(x), ax.py(y))
    ]


def _legend(entries) -> list[str]:
    out = []
    for i, (label, colour) in enumerate(entries):
        y = TOP + 18 + 18 * i
        out.append(f'<rect x="{LEFT + 12}" y="{y - 9}" width="12" height="12" fill="{colour}"/>')
        out.append(f'<text x="{LEFT + 30}" y="{y + 1}">{escape(label)}</text>')
    return out


def _close(parts: list[str]) -> str:
    return "\n".join(parts + ["</svg>"]) + "\n"


def scatter_svg(truth, prediction, band=None, title="Predicted vs reference BBL") -> str:
    truth, prediction = np.asarray(truth, float), np.asarray(prediction, float)
    xs = np.linspace(truth.min(), truth.max(), 50)
    series = [truth, prediction]
    if band is not None:
        lo, hi = band(xs)
        series += [lo, hi]
    lim = _padded(series)
    ax = _Axes(lim, lim)
    parts = _frame(ax, title, "reference (umol/L)", "predicted (umol/L)")
    parts.append(_polyline(ax, lim, lim, "#888888", dash="4 4", width=1))
    if band is not None:
        centre = band.intercept + band.slope * xs
        parts.append(_polyline(ax, xs, centre, COLOURS[1]))
        parts.append(_polyline(ax, xs, lo, COLOURS[1], dash="6 4", width=1))
        parts.append(_polyline(ax, xs, hi, COLOURS[1], dash="6 4", width=1))
    parts += _points(ax, truth, prediction, COLOURS[0])
    return _close(parts)


def bland_altman_svg(truth, prediction, ba, title="Bland-Altman") -> str:
    truth, prediction = np.asarray(truth, float), np.asarray(prediction, float)
    mean = (truth + prediction) / 2.0
    diff = prediction - truth
    ax = _Axes(_padded([mean]), _padded([diff, [ba.loa_lower, ba.loa_upper]]))
    parts = _frame(ax, title, "mean of reference and prediction", "prediction - reference")
    xs = [ax.x0, ax.x1]
    parts.append(_polyline(ax, xs, [ba.md, ba.md], COLOURS[1]))
    for level in (ba.loa_lower, ba.loa_upper):
        parts.append(_polyline(ax, xs, [level, level], COLOURS[1], dash="6 4", width=1))
    parts += _points(ax, mean, diff, COLOURS[0])
    return _close(parts)


def roc_svg(curves, title="ROC") -> str:
    """``curves`` maps a label to an object with fpr, tpr and auroc."""
    ax = _Axes((0, 1), (0, 1))
    parts = _frame(ax, title, "false positive rate", "true positive rate")
    parts.append(_polyline(ax, [0, 1], [0, 1], "#888888", dash="4 4", width=1))
    legend = []
    for i, (label, rep) in enumerate(curves.items()):
        colour = COLOURS[i % len(COLOURS)]
        parts.append(_polyline(ax, rep.fpr, rep.tpr, colour))
        legend.append((f"{label} (AUROC {rep.auroc:.3f})", colour))
    return _close(parts + _legend(legend))


def curve_svg(fractions, series, title="Learning curve", ylabel="value") -> str:
    """``series`` maps a label to y values aligned with ``fractions``."""
    fractions = np.asarray(fractions, float)
    ax = _Axes(_padded([fractions], 0.02), _padded(list(series.values())))
    parts = _frame(ax, title, "fraction of dataset", ylabel)
    legend = []
    for i, (label, ys) in enumerate(series.items()):
        colour = COLOURS[i % len(COLOURS)]
        parts.append(_polyline(ax, fractions, ys, colour))
        parts += _points(ax, fractions, ys, colour)
        legend.append((label, colour))
    return _close(parts + _legend(legend))
