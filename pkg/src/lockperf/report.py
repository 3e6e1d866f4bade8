"""Result tables: the shared CSV schema, comparisons and plot output."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from lockperf.model import MachineParams, Prediction, WorkloadParams, knee_multiplier

HEADER = ("source", "lock", "n", "c", "p", "x", "duration_s", "ops", "throughput", "regime")
SOURCES = ("predict-clh", "predict-queue", "sim", "bench")
REGIMES = ("saturated", "unsaturated", "")

COMPARE_HEADER = (
    "n", "c", "p", "x", "predicted_source", "predicted", "measured_source", "measured", "rel_error",
)


class CsvFormatError(ValueError):
    pass


def fmt_real(value: float | None) -> str:
    if value is None:
        return ""
    return f"{float(value):.6g}"


@dataclass(frozen=True)
class Row:
    source: str
    lock: str
    n: int
    c: int
    p: int
    x: float | None
    duration_s: float | None
    ops: int | None
    throughput: float
    regime: str = ""

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.n, self.c, self.p)

    def fields(self) -> list[str]:
        return [
            self.source,
            self.lock,
            str(self.n),
            str(self.c),
            str(self.p),
            fmt_real(self.x),
            fmt_real(self.duration_s),
            "" if self.ops is None else str(self.ops),
            fmt_real(self.throughput),
            self.regime,
        ]


def prediction_row(pred: Prediction, workload: WorkloadParams) -> Row:
    clh = pred.model_id.value == "clh"
    return Row(
        source="predict-clh" if clh else "predict-queue",
        lock="clh" if clh else "",
        n=workload.n,
        c=workload.c,
        p=workload.p,
        x=workload.p / workload.c,
        duration_s=None,
        ops=None,
        throughput=float(pred.throughput),
        regime=pred.regime.value,
    )


def write_rows(rows: Iterable[Row], out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        writer.writerow(row.fields())


def rows_to_text(rows: Iterable[Row]) -> str:
    buf = io.StringIO()
    write_rows(rows, buf)
    return buf.getvalue()


def _parse_int(text: str, name: str, lineno: int, where: str, optional=False):
    if text == "" and optional:
        return None
    try:
        return int(text)
    except ValueError:
        raise CsvFormatError(f"{where}:{lineno}: column {name!r}: expected an integer, got {text!r}") from None


def _parse_real(text: str, name: str, lineno: int, where: str, optional=False):
    if text == "" and optional:
        return None
    try:
        value = float(text)
    except ValueError:
        raise CsvFormatError(f"{where}:{lineno}: column {name!r}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise CsvFormatError(f"{where}:{lineno}: column {name!r}: not finite")
    return value


def parse_rows(text: str, where: str = "<input>") -> list[Row]:
    """Parse a results table; errors name the offending line."""
    lines = text.splitlines()
    if not lines:
        raise CsvFormatError(f"{where}:1: empty input")
    reader = csv.reader(lines)
    rows = []
    for lineno, fields in enumerate(reader, start=1):
        if lineno == 1:
            if tuple(fields) != HEADER:
                raise CsvFormatError(f"{where}:1: bad header, expected {','.join(HEADER)}")
            continue
        if not fields:
            raise CsvFormatError(f"{where}:{lineno}: blank line")
        if len(fields) != len(HEADER):
            raise CsvFormatError(
                f"{where}:{lineno}: expected {len(HEADER)} fields, got {len(fields)}"
            )
        source, lock, n, c, p, x, duration, ops, throughput, regime = fields
        if source not in SOURCES:
            raise CsvFormatError(f"{where}:{lineno}: unknown source {source!r}")
        if regime not in REGIMES:
            raise CsvFormatError(f"{where}:{lineno}: unknown regime {regime!r}")
        rows.append(
            Row(
                source=source,
                lock=lock,
                n=_parse_int(n, "n", lineno, where),
                c=_parse_int(c, "c", lineno, where),
                p=_parse_int(p, "p", lineno, where),
                x=_parse_real(x, "x", lineno, where, optional=True),
                duration_s=_parse_real(duration, "duration_s", lineno, where, optional=True),
                ops=_parse_int(ops, "ops", lineno, where, optional=True),
                throughput=_parse_real(throughput, "throughput", lineno, where),
                regime=regime,
            )
        )
    return rows


def read_rows(path: str | Path) -> list[Row]:
    path = Path(path)
    return parse_rows(path.read_text(), str(path))


# ------------------------------------------------------------------ comparison

@dataclass(frozen=True)
class ComparisonRow:
    n: int
    c: int
    p: int
    predicted_source: str
    predicted: float
    measured_source: str
    measured: float

    def __post_init__(self):
        if not self.predicted > 0:
            raise ValueError(f"relative error undefined for predicted={self.predicted}")

    @property
    def x(self) -> float:
        return self.p / self.c

    @property
    def rel_error(self) -> float:
        return abs(self.measured - self.predicted) / self.predicted

    def fields(self) -> list[str]:
        return [
            str(self.n), str(self.c), str(self.p), fmt_real(self.x),
            self.predicted_source, fmt_real(self.predicted),
            self.measured_source, fmt_real(self.measured),
            fmt_real(self.rel_error),
        ]


@dataclass(frozen=True)
class Knee:
    n: int
    c: int
    x: float
    method: str  # "analytic" or "grid"


@dataclass
class Comparison:
    rows: list[ComparisonRow]
    knees: list[Knee]

    @property
    def max_rel_error(self) -> float:
        return max(r.rel_error for r in self.rows)

    @property
    def mean_rel_error(self) -> float:
        return sum(r.rel_error for r in self.rows) / len(self.rows)


class KeyMismatchError(ValueError):
    pass


def _by_source(rows: Sequence[Row], where: str) -> dict[str, dict[tuple, Row]]:
    grouped: dict[str, dict[tuple, Row]] = defaultdict(dict)
    for row in rows:
        if row.key in grouped[row.source]:
            raise KeyMismatchError(f"{where}: duplicate key n={row.n} c={row.c} p={row.p} for {row.source}")
        grouped[row.source][row.key] = row
    return grouped


def grid_knees(rows: Sequence[Row]) -> list[Knee]:
    """First multiplier at which each (n, c) series turns unsaturated."""
    series = defaultdict(list)
    for row in rows:
        if row.regime:
            series[(row.n, row.c)].append(row)
    knees = []
    for (n, c), pts in sorted(series.items()):
        pts.sort(key=lambda r: r.p)
        for prev, cur in zip(pts, pts[1:]):
            if prev.regime == "saturated" and cur.regime == "unsaturated":
                knees.append(Knee(n, c, cur.p / c, "grid"))
                break
    return knees


def compare(predicted: Sequence[Row], measured: Sequence[Row], machine: MachineParams | None = None,
            where=("predicted", "measured")) -> Comparison:
    left = _by_source(predicted, where[0])
    right = _by_source(measured, where[1])
    left_keys = set().union(*(g.keys() for g in left.values())) if left else set()
    right_keys = set().union(*(g.keys() for g in right.values())) if right else set()
    if not left_keys or not right_keys:
        raise KeyMismatchError("nothing to compare: an input has no rows")
    if left_keys != right_keys:
        only_left = sorted(left_keys - right_keys)
        only_right = sorted(right_keys - left_keys)
        parts = []
        if only_left:
            parts.append(f"only in {where[0]}: " + " ".join(f"(n={n},c={c},p={p})" for n, c, p in only_left))
        if only_right:
            parts.append(f"only in {where[1]}: " + " ".join(f"(n={n},c={c},p={p})" for n, c, p in only_right))
        raise KeyMismatchError("unmatched keys; " + "; ".join(parts))

    out = []
    for psrc, prows in sorted(left.items()):
        for msrc, mrows in sorted(right.items()):
            for key in sorted(prows.keys() & mrows.keys()):
                out.append(ComparisonRow(*key, psrc, prows[key].throughput, msrc, mrows[key].throughput))

    if machine is not None:
        pairs = sorted({(n, c) for n, c, _ in left_keys})
        knees = [Knee(n, c, float(knee_multiplier(machine, n, c)), "analytic") for n, c in pairs]
    else:
        knees = grid_knees(predicted)
    return Comparison(out, knees)


def write_comparison(comparison: Comparison, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COMPARE_HEADER)
    for row in comparison.rows:
        writer.writerow(row.fields())


def summary_lines(comparison: Comparison) -> list[str]:
    lines = [
        f"max_rel_error={fmt_real(comparison.max_rel_error)}",
        f"mean_rel_error={fmt_real(comparison.mean_rel_error)}",
    ]
    pairs = defaultdict(list)
    for row in comparison.rows:
        pairs[(row.predicted_source, row.measured_source)].append(row.rel_error)
    if len(pairs) > 1:
        for (psrc, msrc), errs in sorted(pairs.items()):
            lines.append(
                f"{psrc} vs {msrc}: max_rel_error={fmt_real(max(errs))} "
                f"mean_rel_error={fmt_real(sum(errs) / len(errs))}"
            )
    for knee in comparison.knees:
        lines.append(f"knee n={knee.n} c={knee.c} x={fmt_real(knee.x)} ({knee.method})")
    return lines


# ----------------------------------------------------------------------- plots

def plot_series(rows: Sequence[Row]) -> dict[tuple[str, int, int], list[tuple[float, float]]]:
    """Group rows into (source, n, c) series of (x, throughput), sorted by x."""
    series = defaultdict(list)
    for row in rows:
        x = row.x if row.x is not None else row.p / row.c
        series[(row.source, row.n, row.c)].append((x, row.throughput))
    return {key: sorted(pts) for key, pts in sorted(series.items())}


def write_gnuplot(rows: Sequence[Row], out) -> None:
    """Whitespace-separated blocks, one per series, addressable with ``index``."""
    series = plot_series(rows)
    out.write("# x throughput; one block per (source, n, c), blocks separated by two blank lines\n")
    for idx, ((source, n, c), pts) in enumerate(series.items()):
        if idx:
            out.write("\n\n")
        out.write(f"# index {idx}: source={source} n={n} c={c}\n")
        for x, thr in pts:
            out.write(f"{fmt_real(x)} {fmt_real(thr)}\n")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(t)
        t += step
    return ticks


def write_svg(rows: Sequence[Row], out, width: int = 720, height: int = 440) -> None:
    """Line chart of throughput against the multiplier x, one line per series."""
    series = plot_series(rows)
    left, right, top, bottom = 70, 200, 20, 50
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    y_lo, y_hi = 0.0, max(ys) * 1.05
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        parts.append(f'<line x1="{sx(t):.1f}" y1="{top + ph}" x2="{sx(t):.1f}" y2="{top + ph + 4}" stroke="#444"/>')
        parts.append(f'<text x="{sx(t):.1f}" y="{top + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y_lo, y_hi):
        parts.append(f'<line x1="{left - 4}" y1="{sy(t):.1f}" x2="{left}" y2="{sy(t):.1f}" stroke="#444"/>')
        parts.append(f'<text x="{left - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">x = P / C</text>')
    parts.append(
        f'<text transform="translate(16,{top + ph / 2}) rotate(-90)" text-anchor="middle">throughput (ops/s)</text>'
    )
    for idx, ((source, n, c), pts) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        dash = ' stroke-dasharray="5,3"' if source.startswith("predict") else ""
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        if len(pts) == 1:
            x, y = pts[0]
            parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        else:
            parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        ly = top + 14 * (idx + 1)
        parts.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{color}"{dash}/>')
        parts.append(f'<text x="{left + pw + 34}" y="{ly}">{source} n={n} c={c}</text>')
    parts.append("</svg>")
    out.write("\n".join(parts) + "\n")


def write_plot(rows: Sequence[Row], path: str | Path) -> str:
    """Write an SVG chart (``.svg``) or gnuplot data (anything else); return the format."""
    if not rows:
        raise ValueError("no rows to plot")
    path = Path(path)
    fmt = "svg" if path.suffix.lower() == ".svg" else "gnuplot"
    with path.open("w") as out:
        (write_svg if fmt == "svg" else write_gnuplot)(rows, out)
    return fmt
