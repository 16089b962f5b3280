"""Dependency-free SVG line plots.

Output is deterministic: the same figure input yields byte-identical SVG.
Data coordinates map affinely onto the plot rectangle with no padding, so
the data bounding box lands exactly on the rectangle's corners. Pixel
coordinates are written as shortest round-trip decimals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import ValidationError
from .model import _require_finite
from .trajio import format_float

PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)

MAX_POINTS_PER_SERIES = 2000
_TICK_TARGET = 10
_NICE_MANTISSAS = (1.0, 2.0, 5.0)

_MARGIN_LEFT = 72.0
_MARGIN_RIGHT = 24.0
_MARGIN_TOP = 48.0
_MARGIN_BOTTOM = 56.0
_FONT = "Helvetica, Arial, sans-serif"


@dataclass(frozen=True)
class Series:
    """One polyline: a label plus equal-length x and y samples."""

    label: str
    x: np.ndarray
    y: np.ndarray
    color: str | None = None

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ValidationError(f"series label must be a non-empty string, got {self.label!r}")
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if len(x) != len(y):
            raise ValidationError(
                f"series {self.label!r}: x and y lengths differ ({len(x)} != {len(y)})"
            )
        if len(x) < 1:
            raise ValidationError(f"series {self.label!r} needs at least one point")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError(f"series {self.label!r} contains non-finite values")
        if self.color is not None and (
            not isinstance(self.color, str) or not self.color.startswith("#")
        ):
            raise ValidationError(
                f"series color must be a #rrggbb string, got {self.color!r}"
            )


@dataclass(frozen=True)
class PlotSpec:
    """Figure layout: titles, canvas size, and the series to draw."""

    title: str
    x_label: str
    y_label: str
    series: tuple
    width: int = 960
    height: int = 600
    legend: bool = True

    def __post_init__(self):
        for name in ("title", "x_label", "y_label"):
            if not isinstance(getattr(self, name), str):
                raise ValidationError(f"{name} must be a string, got {getattr(self, name)!r}")
        series = tuple(self.series)
        if not series:
            raise ValidationError("plot needs at least one series")
        for s in series:
            if not isinstance(s, Series):
                raise ValidationError(f"series entries must be Series, got {type(s).__name__}")
        object.__setattr__(self, "series", series)
        for name in ("width", "height"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"{name} must be an integer, got {value!r}")
            if value < 100:
                raise ValidationError(f"{name} must be >= 100, got {value!r}")


def nice_tick_step(span: float) -> float:
    """Smallest 1/2/5 x 10^n step giving at most ~10 intervals over span."""
    span = _require_finite(span, "span")
    if span <= 0.0:
        raise ValidationError(f"span must be > 0, got {span!r}")
    raw = span / _TICK_TARGET
    exponent = math.floor(math.log10(raw))
    scale = 10.0**exponent
    for mantissa in _NICE_MANTISSAS:
        if mantissa * scale >= raw:
            return mantissa * scale
    return 10.0 * scale


def tick_values(lo: float, hi: float) -> list[float]:
    """Multiples of the nice step inside [lo, hi] (at most 11 of them)."""
    step = nice_tick_step(hi - lo)
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return [k * step for k in range(first, last + 1)]


def _thin(values: np.ndarray) -> np.ndarray:
    n = len(values)
    if n <= MAX_POINTS_PER_SERIES:
        return values
    stride = -(-n // MAX_POINTS_PER_SERIES)
    picked = list(range(0, n, stride))
    if picked[-1] != n - 1:
        picked.append(n - 1)
    return values[picked]


def _data_range(series, axis: str) -> tuple[float, float]:
    lo = math.inf
    hi = -math.inf
    for s in series:
        values = s.x if axis == "x" else s.y
        lo = min(lo, float(np.min(values)))
        hi = max(hi, float(np.max(values)))
    if lo == hi:
        lo -= 1.0
        hi += 1.0
    return lo, hi


def _tick_label(value: float) -> str:
    if value == 0.0:
        return "0"
    return f"{value:.10g}"


def render_svg(spec: PlotSpec) -> str:
    """The figure as an SVG 1.1 document string."""
    width = float(spec.width)
    height = float(spec.height)
    left = _MARGIN_LEFT
    top = _MARGIN_TOP
    right = width - _MARGIN_RIGHT
    bottom = height - _MARGIN_BOTTOM
    plot_w = right - left
    plot_h = bottom - top

    x_lo, x_hi = _data_range(spec.series, "x")
    y_lo, y_hi = _data_range(spec.series, "y")

    def px(x: float) -> float:
        return left + (x - x_lo) * (plot_w / (x_hi - x_lo))

    def py(y: float) -> float:
        return bottom - (y - y_lo) * (plot_h / (y_hi - y_lo))

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" '
        f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">'
    )
    out.append(f'<rect x="0" y="0" width="{spec.width}" height="{spec.height}" fill="#ffffff"/>')

    grid = []
    labels = []
    for xv in tick_values(x_lo, x_hi):
        x_px = px(xv)
        grid.append(
            f'<line x1="{format_float(x_px)}" y1="{format_float(top)}" '
            f'x2="{format_float(x_px)}" y2="{format_float(bottom)}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        labels.append(
            f'<text x="{format_float(x_px)}" y="{format_float(bottom + 18.0)}" '
            f'font-family="{_FONT}" font-size="12" fill="#444444" '
            f'text-anchor="middle">{escape(_tick_label(xv))}</text>'
        )
    for yv in tick_values(y_lo, y_hi):
        y_px = py(yv)
        grid.append(
            f'<line x1="{format_float(left)}" y1="{format_float(y_px)}" '
            f'x2="{format_float(right)}" y2="{format_float(y_px)}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        labels.append(
            f'<text x="{format_float(left - 8.0)}" y="{format_float(y_px + 4.0)}" '
            f'font-family="{_FONT}" font-size="12" fill="#444444" '
            f'text-anchor="end">{escape(_tick_label(yv))}</text>'
        )
    out.extend(grid)
    out.append(
        f'<rect x="{format_float(left)}" y="{format_float(top)}" '
        f'width="{format_float(plot_w)}" height="{format_float(plot_h)}" '
        'fill="none" stroke="#333333" stroke-width="1"/>'
    )
    out.extend(labels)

    for index, s in enumerate(spec.series):
        color = s.color if s.color is not None else PALETTE[index % len(PALETTE)]
        xs = _thin(s.x)
        ys = _thin(s.y)
        points = " ".join(
            ("M" if i == 0 else "L") + f"{format_float(px(float(xs[i])))}"
            f",{format_float(py(float(ys[i])))}"
            for i in range(len(xs))
        )
        if len(xs) == 1:
            out.append(
                f'<circle cx="{format_float(px(float(xs[0])))}" '
                f'cy="{format_float(py(float(ys[0])))}" r="2.5" fill="{color}"/>'
            )
        else:
            out.append(
                f'<path d="{points}" fill="none" stroke="{color}" stroke-width="1.5" '
                'stroke-linejoin="round" stroke-linecap="round"/>'
            )

    if spec.legend:
        legend_x = right - 170.0
        legend_y = top + 12.0
        for index, s in enumerate(spec.series):
            color = s.color if s.color is not None else PALETTE[index % len(PALETTE)]
            row_y = legend_y + 18.0 * index
            out.append(
                f'<line x1="{format_float(legend_x)}" y1="{format_float(row_y)}" '
                f'x2="{format_float(legend_x + 22.0)}" y2="{format_float(row_y)}" '
                f'stroke="{color}" stroke-width="3"/>'
            )
            out.append(
                f'<text x="{format_float(legend_x + 28.0)}" y="{format_float(row_y + 4.0)}" '
                f'font-family="{_FONT}" font-size="12" fill="#222222">'
                f"{escape(s.label)}</text>"
            )

    out.append(
        f'<text x="{format_float(width / 2.0)}" y="26" font-family="{_FONT}" '
        f'font-size="16" font-weight="bold" fill="#111111" '
        f'text-anchor="middle">{escape(spec.title)}</text>'
    )
    out.append(
        f'<text x="{format_float(left + plot_w / 2.0)}" y="{format_float(height - 14.0)}" '
        f'font-family="{_FONT}" font-size="13" fill="#222222" '
        f'text-anchor="middle">{escape(spec.x_label)}</text>'
    )
    out.append(
        f'<text x="20" y="{format_float(top + plot_h / 2.0)}" font-family="{_FONT}" '
        f'font-size="13" fill="#222222" text-anchor="middle" '
        f'transform="rotate(-90 20 {format_float(top + plot_h / 2.0)})">'
        f"{escape(spec.y_label)}</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
