"""Artifact emitters: CSV tables, a plain-text fit report, and SVG charts.

Everything here is a pure function of its inputs and byte-deterministic:
no timestamps, no environment lookups, numbers printed in their minimal
round-trip form (repr) except pixel coordinates, which are fixed to two
decimals. That keeps emitted artifacts stable under golden-file comparison.
"""

from __future__ import annotations

import csv
import io
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape

from bibmap.records import ProvenanceLedger
from bibmap.trends import CategoryTable, RegressionModel, TimeSeries, predict

MARKERS = ("square", "circle", "triangle")

FIT_SAMPLES_PER_YEAR = 10


def fmt_num(value) -> str:
    """Minimal round-trip decimal form; integral floats keep their .0."""
    if isinstance(value, bool):
        raise TypeError("booleans are not chart numbers")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _coord(value: float) -> str:
    return f"{value:.2f}"


# -- CSV ---------------------------------------------------------------------


def _csv_bytes(rows: list[list]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    for row in rows:
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def timeseries_csv(series: TimeSeries) -> bytes:
    rows: list[list] = [["year", "value", "partial"]]
    for year, value in series.points:
        rows.append([year, fmt_num(value),
                     "true" if year == series.partial_year else "false"])
    return _csv_bytes(rows)


def categories_csv(table: CategoryTable) -> bytes:
    rows: list[list] = [["category", "count"]]
    for row in table.rows:
        rows.append([row.name, row.count])
    rows.append(["explicit-total", table.explicit_total])
    return _csv_bytes(rows)


def ledger_csv(ledger: ProvenanceLedger) -> bytes:
    rows: list[list] = [["stage", "in", "removed", "out", "digest"]]
    for entry in ledger.entries:
        rows.append([entry.stage, entry.input, entry.removed, entry.output,
                     entry.digest])
    return _csv_bytes(rows)


def emit_tables(result) -> bytes:
    """CSV for any analytics output that has a tabular form."""
    if isinstance(result, TimeSeries):
        return timeseries_csv(result)
    if isinstance(result, CategoryTable):
        return categories_csv(result)
    if isinstance(result, ProvenanceLedger):
        return ledger_csv(result)
    raise TypeError(f"no CSV form for {type(result).__name__}")


# -- plain text --------------------------------------------------------------


def _pad_table(rows: list[list[str]]) -> list[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
            for row in rows]


def fit_report_text(model: RegressionModel) -> bytes:
    term_names = {0: "intercept"}
    for degree in model.degrees:
        term_names[degree] = f"(t-t0)^{degree}"
    lines = [
        f"trend fit over {model.n_points} points, origin t0 = {model.t0}, "
        f"max degree {model.max_degree}",
        "",
    ]
    table = [["term", "coefficient", "std error", "p-value"]]
    for key in [0] + list(model.degrees):
        table.append([term_names[key],
                      fmt_num(model.coefficients[key]),
                      fmt_num(model.std_errors[key]),
                      fmt_num(model.p_values[key])])
    lines.extend(_pad_table(table))
    lines.append("")
    if model.r2 is None:
        lines.append("r2 = undefined (constant series)")
    else:
        lines.append(f"r2 = {fmt_num(model.r2)}")
    lines.append(f"sigma = {fmt_num(model.sigma)}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def ledger_text(ledger: ProvenanceLedger) -> bytes:
    table = [["stage", "in", "removed", "out", "digest"]]
    for entry in ledger.entries:
        table.append([entry.stage, str(entry.input), str(entry.removed),
                      str(entry.output), entry.digest])
    return ("\n".join(_pad_table(table)) + "\n").encode("utf-8")


# -- charts ------------------------------------------------------------------


@dataclass(frozen=True)
class LineSeries:
    label: str
    points: tuple[tuple[float, float], ...]
    marker: str = "square"

    def __post_init__(self):
        if self.marker not in MARKERS:
            raise ValueError(f"unknown marker {self.marker!r}")
        if not self.points:
            raise ValueError(f"series {self.label!r} has no points")


@dataclass(frozen=True)
class ChartSpec:
    kind: str                          # line-with-fit | radar
    title: str
    series: tuple[LineSeries, ...] = ()
    model: RegressionModel | None = None
    axes: tuple[tuple[str, float], ...] = ()   # radar axes: (name, value)
    width: int = 800
    height: int = 600
    x_label: str = ""
    y_label: str = ""

    def __post_init__(self):
        if self.kind not in ("line-with-fit", "radar"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"canvas must be positive, got "
                             f"{self.width}x{self.height}")
        if self.kind == "line-with-fit":
            if sum(len(s.points) for s in self.series) < 2:
                raise ValueError("line chart needs at least 2 points")
        else:
            if len(self.axes) < 3:
                raise ValueError("radar chart needs at least 3 axes")
            for name, value in self.axes:
                if not math.isfinite(value) or value < 0:
                    raise ValueError(f"radar axis {name!r} needs a finite "
                                     f"non-negative value, got {value!r}")


def line_chart_spec(title: str, series: TimeSeries,
                    model: RegressionModel | None = None,
                    label: str = "references",
                    extra: tuple[LineSeries, ...] = (),
                    x_label: str = "year", y_label: str = "count") -> ChartSpec:
    base = LineSeries(label=label,
                      points=tuple((float(y), v) for y, v in series.points))
    return ChartSpec(kind="line-with-fit", title=title, series=(base,) + extra,
                     model=model, x_label=x_label, y_label=y_label)


def _nice_step(raw: float) -> float:
    if raw <= 0:
        return 1.0
    power = math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * 10.0 ** power
        if step >= raw:
            return step
    return 10.0 ** (power + 1)


def _marker_svg(marker: str, x: float, y: float, size: float, color: str) -> str:
    h = size / 2.0
    if marker == "square":
        return (f'<rect x="{_coord(x - h)}" y="{_coord(y - h)}" '
                f'width="{_coord(size)}" height="{_coord(size)}" fill="{color}"/>')
    if marker == "circle":
        return (f'<circle cx="{_coord(x)}" cy="{_coord(y)}" r="{_coord(h)}" '
                f'fill="none" stroke="{color}" stroke-width="1.5"/>')
    points = f"{_coord(x)},{_coord(y - h)} {_coord(x - h)},{_coord(y + h)} {_coord(x + h)},{_coord(y + h)}"
    return f'<polygon points="{points}" fill="{color}"/>'


_SERIES_COLORS = ("#1a1a1a", "#c0392b", "#2471a3", "#1e8449")


def render_line_chart(spec: ChartSpec) -> bytes:
    if spec.kind != "line-with-fit":
        raise ValueError("spec is not a line chart")
    margin_left, margin_right, margin_top, margin_bottom = 70, 24, 48, 56
    plot_w = spec.width - margin_left - margin_right
    plot_h = spec.height - margin_top - margin_bottom
    if plot_w <= 0 or plot_h <= 0:
        raise ValueError("canvas too small for the fixed margins")

    xs = [x for s in spec.series for x, _ in s.points]
    ys = [y for s in spec.series for _, y in s.points]
    x_min, x_max = min(xs), max(xs)
    if x_min == x_max:
        x_min, x_max = x_min - 0.5, x_max + 0.5
    y_low, y_high = min(min(ys), 0.0), max(max(ys), 0.0)
    if spec.model is not None:
        # the fitted curve can overshoot the data; include its extremes
        steps = int(round((x_max - x_min) * FIT_SAMPLES_PER_YEAR))
        curve_ys = [predict(spec.model, x_min + k / FIT_SAMPLES_PER_YEAR)
                    for k in range(steps + 1)]
        y_low = min([y_low] + curve_ys)
        y_high = max([y_high] + curve_ys)
    span = y_high - y_low
    y_step = _nice_step(span / 5.0) if span > 0 else 1.0
    y_max = y_step * math.ceil(y_high / y_step)
    y_min = y_step * math.floor(y_low / y_step)
    if y_max == y_min:
        y_max = y_min + y_step

    def sx(x: float) -> float:
        return margin_left + (x - x_min) / (x_max - x_min) * plot_w

    def sy(y: float) -> float:
        return margin_top + plot_h - (y - y_min) / (y_max - y_min) * plot_h

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" '
             f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">',
             f'<rect width="{spec.width}" height="{spec.height}" fill="white"/>',
             f'<text x="{_coord(spec.width / 2)}" y="26" text-anchor="middle" '
             f'font-family="sans-serif" font-size="16">{escape(spec.title)}</text>']

    # axes
    x0, y0 = margin_left, margin_top + plot_h
    parts.append(f'<line x1="{_coord(x0)}" y1="{_coord(y0)}" x2="{_coord(x0 + plot_w)}" '
                 f'y2="{_coord(y0)}" stroke="black"/>')
    parts.append(f'<line x1="{_coord(x0)}" y1="{_coord(margin_top)}" x2="{_coord(x0)}" '
                 f'y2="{_coord(y0)}" stroke="black"/>')

    # x ticks on integer years
    span = x_max - x_min
    x_tick_step = 1
    for cand in (1, 2, 5, 10, 20, 50):
        if span / cand <= 12:
            x_tick_step = cand
            break
    tick = math.ceil(x_min)
    while tick <= x_max:
        if (tick - math.ceil(x_min)) % x_tick_step == 0:
            px = sx(tick)
            parts.append(f'<line x1="{_coord(px)}" y1="{_coord(y0)}" x2="{_coord(px)}" '
                         f'y2="{_coord(y0 + 5)}" stroke="black"/>')
            parts.append(f'<text x="{_coord(px)}" y="{_coord(y0 + 20)}" '
                         f'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="11">{int(tick)}</text>')
        tick += 1
    # y ticks
    n_ticks = int(round((y_max - y_min) / y_step))
    for i in range(n_ticks + 1):
        value = y_min + i * y_step
        py = sy(value)
        parts.append(f'<line x1="{_coord(x0 - 5)}" y1="{_coord(py)}" x2="{_coord(x0)}" '
                     f'y2="{_coord(py)}" stroke="black"/>')
        label = fmt_num(int(value)) if float(value).is_integer() else fmt_num(value)
        parts.append(f'<text x="{_coord(x0 - 9)}" y="{_coord(py + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')

    if spec.x_label:
        parts.append(f'<text x="{_coord(x0 + plot_w / 2)}" y="{_coord(spec.height - 12)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="13">{escape(spec.x_label)}</text>')
    if spec.y_label:
        cx, cy = 18, margin_top + plot_h / 2
        parts.append(f'<text x="{_coord(cx)}" y="{_coord(cy)}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13" '
                     f'transform="rotate(-90 {_coord(cx)} {_coord(cy)})">'
                     f'{escape(spec.y_label)}</text>')

    # fitted curve sampled at a fixed per-year rate
    if spec.model is not None:
        steps = int(round((x_max - x_min) * FIT_SAMPLES_PER_YEAR))
        coords = []
        for k in range(steps + 1):
            t = x_min + k / FIT_SAMPLES_PER_YEAR
            coords.append(f"{_coord(sx(t))},{_coord(sy(predict(spec.model, t)))}")
        parts.append(f'<polyline points="{" ".join(coords)}" fill="none" '
                     f'stroke="#555555" stroke-width="1.5"/>')

    for idx, series in enumerate(spec.series):
        color = _SERIES_COLORS[idx % len(_SERIES_COLORS)]
        for x, y in series.points:
            parts.append(_marker_svg(series.marker, sx(x), sy(y), 8.0, color))

    # legend when there is more than one thing on the canvas
    if len(spec.series) > 1 or spec.model is not None:
        lx = x0 + plot_w - 170
        ly = margin_top + 8
        entries = [(s.label, s.marker, _SERIES_COLORS[i % len(_SERIES_COLORS)])
                   for i, s in enumerate(spec.series)]
        if spec.model is not None:
            entries.append(("fit", None, "#555555"))
        parts.append('<g class="legend">')
        for label, marker, color in entries:
            if marker is None:
                parts.append(f'<line x1="{_coord(lx)}" y1="{_coord(ly)}" '
                             f'x2="{_coord(lx + 16)}" y2="{_coord(ly)}" '
                             f'stroke="{color}" stroke-width="1.5"/>')
            else:
                parts.append(_marker_svg(marker, lx + 8, ly, 8.0, color))
            parts.append(f'<text x="{_coord(lx + 24)}" y="{_coord(ly + 4)}" '
                         f'font-family="sans-serif" font-size="11">'
                         f'{escape(label)}</text>')
            ly += 18
        parts.append("</g>")

    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def render_radar(spec: ChartSpec) -> bytes:
    if spec.kind != "radar":
        raise ValueError("spec is not a radar chart")
    cx, cy = spec.width / 2.0, spec.height / 2.0 + 10
    radius = min(spec.width, spec.height) / 2.0 - 90
    if radius <= 0:
        raise ValueError("canvas too small for a radar plot")
    n = len(spec.axes)
    max_value = max(value for _, value in spec.axes)
    degenerate = max_value == 0

    def point(i: int, r: float) -> tuple[float, float]:
        # axis 0 points straight up; following axes proceed clockwise
        theta = 2.0 * math.pi * i / n
        return cx + r * math.sin(theta), cy - r * math.cos(theta)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" '
             f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">',
             f'<rect width="{spec.width}" height="{spec.height}" fill="white"/>',
             f'<text x="{_coord(spec.width / 2)}" y="26" text-anchor="middle" '
             f'font-family="sans-serif" font-size="16">{escape(spec.title)}</text>']

    # concentric reference rings at quarter fractions
    for frac in (0.25, 0.5, 0.75, 1.0):
        ring = " ".join(f"{_coord(px)},{_coord(py)}"
                        for px, py in (point(i, radius * frac) for i in range(n)))
        parts.append(f'<polygon points="{ring}" fill="none" stroke="#cccccc"/>')
    for i, (name, _) in enumerate(spec.axes):
        ex, ey = point(i, radius)
        parts.append(f'<line x1="{_coord(cx)}" y1="{_coord(cy)}" x2="{_coord(ex)}" '
                     f'y2="{_coord(ey)}" stroke="#999999"/>')
        lx, ly = point(i, radius + 26)
        parts.append(f'<text x="{_coord(lx)}" y="{_coord(ly + 4)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{escape(name)}</text>')

    vertices = []
    for i, (_, value) in enumerate(spec.axes):
        r = 0.0 if degenerate else value / max_value * radius
        vertices.append(point(i, r))
    poly = " ".join(f"{_coord(px)},{_coord(py)}" for px, py in vertices)
    parts.append(f'<polygon points="{poly}" fill="#2471a3" fill-opacity="0.25" '
                 f'stroke="#2471a3" stroke-width="1.5"/>')

    for (px, py), (_, value) in zip(vertices, spec.axes):
        label = fmt_num(int(value)) if float(value).is_integer() else fmt_num(value)
        parts.append(f'<circle cx="{_coord(px)}" cy="{_coord(py)}" r="2.5" '
                     f'fill="#2471a3"/>')
        parts.append(f'<text x="{_coord(px)}" y="{_coord(py - 7)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')

    if degenerate:
        parts.append(f'<text x="{_coord(spec.width / 2)}" '
                     f'y="{_coord(spec.height - 16)}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12" fill="#c0392b">'
                     f'warning: all axis values are zero</text>')

    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def validate_svg(data: bytes) -> None:
    """Well-formedness gate: parseable XML and every numeric attribute finite."""
    root = ET.fromstring(data.decode("utf-8"))
    numeric_attrs = ("x", "y", "x1", "y1", "x2", "y2", "cx", "cy", "r",
                     "width", "height")
    for element in root.iter():
        for attr in numeric_attrs:
            raw = element.get(attr)
            if raw is None:
                continue
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(f"non-finite {attr} attribute: {raw}")
        points = element.get("points")
        if points:
            for pair in points.split():
                for coord in pair.split(","):
                    if not math.isfinite(float(coord)):
                        raise ValueError(f"non-finite coordinate: {pair}")
