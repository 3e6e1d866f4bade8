"""lockperf command line: predict, simulate, bench, calibrate, compare, plot.

Every table goes to stdout (or ``--out``) in one CSV schema::

    source,lock,n,c,p,x,duration_s,ops,throughput,regime

Grids take comma lists and inclusive ranges, e.g. ``--x 1..150`` or
``--x 1..141:10``.  Machine constants come from inline flags or a
``key=value`` file written by ``calibrate`` (``--machine FILE``).
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from lockperf import harness, report, sim
from lockperf.model import (
    MachineParams,
    WorkloadParams,
    predict_clh,
    predict_queue_model,
)

log = logging.getLogger("lockperf")

DEFAULT_N = "5,10,20,30,39"
DEFAULT_C = "100,500,1000,5000,10000"
DEFAULT_X = "1..150"


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------- grids

def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_grid(text: str) -> list:
    """``"1,5,10..20:5"`` -> ``[1, 5, 10, 15, 20]``; ranges are inclusive."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise UsageError(f"empty item in grid {text!r}")
        try:
            if ".." in part:
                span, _, step = part.partition(":")
                lo, hi = (_number(v) for v in span.split("..", 1))
                step = _number(step) if step else 1
                if step <= 0:
                    raise UsageError(f"range step must be positive in {part!r}")
                k = 0
                while lo + k * step <= hi + 1e-9:
                    values.append(lo + k * step)
                    k += 1
            else:
                values.append(_number(part))
        except ValueError:
            raise UsageError(f"cannot parse grid item {part!r}") from None
    return values


@dataclass(frozen=True)
class Grid:
    ns: tuple
    cs: tuple
    xs: tuple

    def workloads(self):
        for n in self.ns:
            for c in self.cs:
                for x in self.xs:
                    yield WorkloadParams.from_multiplier(n, c, x)


def grid_from_args(args) -> Grid:
    ns, cs, xs = parse_grid(args.n), parse_grid(args.c), parse_grid(args.x)
    for name, vals in (("n", ns), ("c", cs)):
        if any(not isinstance(v, int) for v in vals):
            raise UsageError(f"--{name} must be integers")
    grid = Grid(tuple(ns), tuple(cs), tuple(xs))
    try:
        for _ in grid.workloads():
            pass
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid grid point: {exc}") from None
    return grid


# --------------------------------------------------------------- machine file

def read_machine_file(path: str | Path) -> dict[str, float]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or key.strip() not in ("alpha", "w", "ri", "x"):
            raise UsageError(f"{path}:{lineno}: expected alpha=, w=, ri= or x=, got {line!r}")
        try:
            values[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad number {value.strip()!r}") from None
    return values


def format_machine_file(machine: MachineParams) -> str:
    return (
        f"alpha={machine.alpha!r}\n"
        f"w={machine.w!r}\n"
        f"ri={machine.r_i!r}\n"
        f"x={machine.x!r}\n"
    )


def _machine_values(args) -> dict[str, float]:
    values = read_machine_file(args.machine) if getattr(args, "machine", None) else {}
    for key, attr in (("alpha", "alpha"), ("w", "w"), ("ri", "ri"), ("x", "swap_bound")):
        value = getattr(args, attr, None)
        if value is not None:
            values[key] = value
    return values


def machine_from_args(args, need=("alpha", "w", "ri")) -> MachineParams:
    values = _machine_values(args)
    missing = [k for k in need if k not in values]
    if missing:
        flags = ", ".join("--" + k for k in missing)
        raise UsageError(f"missing machine parameters ({flags}); pass them or use --machine FILE")
    try:
        return MachineParams(
            alpha=values["alpha"],
            w=values.get("w", 0.0),
            r_i=values.get("ri", 0.0),
            x=values.get("x"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -------------------------------------------------------------------- commands

def cmd_predict(args) -> list[report.Row]:
    grid = grid_from_args(args)
    models = ("clh", "queue") if args.model == "both" else (args.model,)
    need = ("alpha", "w", "ri") if "clh" in models else ("alpha",)
    machine = machine_from_args(args, need)
    rows = []
    for wl in grid.workloads():
        if "clh" in models:
            rows.append(report.prediction_row(predict_clh(machine, wl), wl))
        if "queue" in models:
            rows.append(report.prediction_row(predict_queue_model(machine.alpha, wl), wl))
    return rows


def cmd_simulate(args) -> list[report.Row]:
    grid = grid_from_args(args)
    machine = machine_from_args(args)
    rows = []
    for wl in grid.workloads():
        try:
            config = sim.SimConfig(machine, wl, args.warmup, args.measure)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        res = sim.simulate(config, kernel=args.kernel)
        rows.append(
            report.Row(
                source="sim",
                lock="clh",
                n=wl.n,
                c=wl.c,
                p=wl.p,
                x=wl.p / wl.c,
                duration_s=res.ticks / machine.alpha,
                ops=res.total_ops,
                throughput=res.throughput,
                regime=res.observed_regime.value,
            )
        )
    return rows


def _record_row(rec: harness.MeasurementRecord) -> report.Row:
    s = rec.setting
    return report.Row(
        source="bench",
        lock=s.lock,
        n=s.n,
        c=s.c,
        p=s.p,
        x=s.p / s.c,
        duration_s=rec.elapsed_s,
        ops=rec.ops,
        throughput=rec.throughput,
    )


def _bench_machine(args):
    if args.fake:
        return harness.SimulatedMachine(machine_from_args(args))
    return harness.HardwareMachine(warmup_s=args.warmup_s)


def cmd_bench(args) -> list[report.Row]:
    grid = grid_from_args(args)
    machine = _bench_machine(args)
    rows = []
    for n in grid.ns:
        for c in grid.cs:
            for x in grid.xs:
                try:
                    setting = harness.BenchSetting(args.lock, n, c, x, args.duration)
                except ValueError as exc:
                    raise UsageError(str(exc)) from None
                rec = machine.run_bench(setting)
                if rec.cpus is not None:
                    print(f"# bench n={n} c={c} x={x:g} pinned to cpus "
                          + ",".join(map(str, rec.cpus)), file=sys.stderr)
                rows.append(_record_row(rec))
    return rows


def cmd_calibrate(args) -> str:
    if args.records:
        if args.alpha is None:
            raise UsageError("--records needs --alpha")
        rows = report.read_rows(args.records)
        records = [
            harness.MeasurementRecord(
                harness.BenchSetting(r.lock or "clh", r.n, r.c, r.p / r.c, max(r.duration_s or 1.0, 1.0)),
                ops=r.ops if r.ops is not None else int(round(r.throughput)),
                elapsed_s=(r.ops / r.throughput) if r.ops else 1.0,
            )
            for r in rows
            if r.source in ("bench", "sim")
        ]
        result = harness.calibrate_costs(records, args.alpha)
    else:
        grid = grid_from_args(args)
        if len(grid.ns) != 1:
            raise UsageError("calibrate runs one thread count; pass a single --n")
        machine = _bench_machine(args)
        result, records = harness.fit_machine(
            machine,
            n=grid.ns[0],
            cs=grid.cs,
            xs=grid.xs,
            duration_s=args.duration,
            alpha_n=args.alpha_n,
            alpha_p=args.alpha_p,
            lock=args.lock,
        )
        if args.records_out:
            with open(args.records_out, "w") as fh:
                report.write_rows([_record_row(r) for r in records], fh)
    print(
        f"# residual={report.fmt_real(result.residual)} saturated={result.saturated_points} "
        f"unsaturated={result.unsaturated_points} ({result.source})",
        file=sys.stderr,
    )
    return format_machine_file(result.machine)


def cmd_compare(args) -> report.Comparison:
    predicted = report.read_rows(args.predicted)
    measured = report.read_rows(args.measured)
    values = _machine_values(args)
    machine = None
    if "w" in values and "ri" in values:
        machine = MachineParams(alpha=values.get("alpha", 1.0), w=values["w"], r_i=values["ri"])
    return report.compare(predicted, measured, machine, where=(args.predicted, args.measured))


def cmd_plot(args) -> str:
    rows = []
    for path in args.inputs:
        rows.extend(report.read_rows(path))
    if not rows:
        raise UsageError("no rows to plot: input is empty")
    return report.write_plot(rows, args.out)


# ---------------------------------------------------------------------- parser

def _add_machine(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("machine parameters")
    g.add_argument("--machine", metavar="FILE", help="calibration file (alpha=, w=, ri=, x=)")
    g.add_argument("--alpha", type=float, help="work units per second per process")
    g.add_argument("--w", type=float, help="cost of a write / uncontended swap")
    g.add_argument("--ri", type=float, help="cost of reading an invalid line")
    g.add_argument("--swap-bound", type=float, help="contended swap bound X (default: w)")


def _add_grid(p: argparse.ArgumentParser, n=DEFAULT_N, c=DEFAULT_C, x=DEFAULT_X) -> None:
    g = p.add_argument_group("grid")
    g.add_argument("--n", default=n, help=f"process counts (default {n})")
    g.add_argument("--c", default=c, help=f"critical-section sizes (default {c})")
    g.add_argument("--x", default=x, help=f"multipliers, P = x*C (default {x})")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="PATH", help="write the table here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lockperf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="closed-form throughput over a grid")
    p.add_argument("--model", choices=("clh", "queue", "both"), default="clh")
    _add_machine(p)
    _add_grid(p)
    _add_out(p)

    p = sub.add_parser("simulate", help="simulated throughput over a grid")
    p.add_argument("--warmup", type=int, default=10, help="per-process ops discarded")
    p.add_argument("--measure", type=int, default=50, help="per-process ops measured")
    p.add_argument("--kernel", choices=sim.available_kernels(), default=None)
    _add_machine(p)
    _add_grid(p)
    _add_out(p)

    for name, text in (("bench", "measure real lock throughput"),
                       ("calibrate", "fit alpha, W and R_I")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--lock", choices=("clh", "spin"), default="clh")
        p.add_argument("--duration", type=float, default=10.0, help="seconds per setting")
        p.add_argument("--warmup-s", type=float, default=harness.DEFAULT_WARMUP_S)
        p.add_argument("--fake", action="store_true",
                       help="answer from the simulator with the given machine parameters")
        _add_machine(p)
        if name == "bench":
            _add_grid(p)
        else:
            _add_grid(p, n="4", c="100,500,1000", x="1,2,5,20,50,150")
            p.add_argument("--alpha-n", type=int, default=1, help="threads for alpha calibration")
            p.add_argument("--alpha-p", type=int, default=10_000, help="P-loop size for alpha calibration")
            p.add_argument("--records", metavar="CSV", help="fit W, R_I from existing rows (needs --alpha)")
            p.add_argument("--records-out", metavar="CSV", help="also save the bench rows")
        _add_out(p)

    p = sub.add_parser("compare", help="relative error between two result tables")
    p.add_argument("predicted")
    p.add_argument("measured")
    _add_machine(p)
    _add_out(p)

    p = sub.add_parser("plot", help="SVG chart or gnuplot data from result tables")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True, help="*.svg for a chart, anything else for gnuplot data")
    return parser


@contextlib.contextmanager
def _output(path):
    if path:
        with open(path, "w") as fh:
            yield fh
    else:
        yield sys.stdout


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.command in ("predict", "simulate", "bench"):
        rows = {"predict": cmd_predict, "simulate": cmd_simulate, "bench": cmd_bench}[args.command](args)
        with _output(args.out) as out:
            report.write_rows(rows, out)
    elif args.command == "calibrate":
        text = cmd_calibrate(args)
        with _output(args.out) as out:
            out.write(text)
    elif args.command == "compare":
        comparison = cmd_compare(args)
        with _output(args.out) as out:
            report.write_comparison(comparison, out)
        for line in report.summary_lines(comparison):
            print("# " + line, file=sys.stderr)
    else:
        fmt = cmd_plot(args)
        print(f"# wrote {fmt} to {args.out}", file=sys.stderr)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        print(f"lockperf: usage error: {exc}", file=sys.stderr)
        return 2
    except (report.CsvFormatError, report.KeyMismatchError, harness.IdentifiabilityError,
            harness.PinningError, harness.CalibrationError, sim.SimulationError,
            OSError, ValueError) as exc:
        print(f"lockperf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
