"""Benchmark execution and calibration of the machine constants.

Two machines implement the same bench interface:

* :class:`HardwareMachine` runs the real locks on threads pinned one per
  hardware thread, filling the cores of one socket before the next.
* :class:`SimulatedMachine` answers the same calls from the simulator, with
  injected ground-truth constants, so calibration code can be tested
  deterministically.
"""
from __future__ import annotations

import logging
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from lockperf import locks
from lockperf.model import (
    MachineParams,
    WorkloadParams,
    predict_clh,
)
from lockperf.sim import SimConfig, simulate

log = logging.getLogger(__name__)

CPU_LIST_ENV = "LOCKPERF_CPUS"
DEFAULT_WARMUP_S = 1.0


class PinningError(RuntimeError):
    pass


class IdentifiabilityError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BenchSetting:
    lock: str
    n: int
    c: int
    x: float
    duration_s: float = 10.0

    def __post_init__(self):
        if self.lock not in locks.LOCK_KINDS:
            raise ValueError(f"unknown lock kind {self.lock!r}")
        if not self.duration_s >= 1:
            raise ValueError(f"duration must be at least 1 second, got {self.duration_s}")
        if self.x < 0:
            raise ValueError(f"x must be >= 0, got {self.x}")
        self.workload  # validates n, c, p

    @property
    def p(self) -> int:
        return int(round(self.x * self.c))

    @property
    def workload(self) -> WorkloadParams:
        return WorkloadParams(self.n, self.c, self.p)


@dataclass(frozen=True)
class MeasurementRecord:
    setting: BenchSetting
    ops: int
    elapsed_s: float
    per_thread: tuple[int, ...] | None = None
    cpus: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.elapsed_s <= 0:
            raise ValueError("elapsed time must be positive")
        if self.per_thread is not None and sum(self.per_thread) != self.ops:
            raise ValueError(
                f"per-thread counts sum to {sum(self.per_thread)}, expected {self.ops}"
            )

    @property
    def throughput(self) -> float:
        return self.ops / self.elapsed_s

    @property
    def workload(self) -> WorkloadParams:
        return self.setting.workload


@dataclass(frozen=True)
class CalibrationResult:
    machine: MachineParams
    residual: float
    source: str
    saturated_points: int = 0
    unsaturated_points: int = 0


class BenchMachine(Protocol):
    def run_parallel(self, n: int, p: int, duration_s: float) -> tuple[int, float]:
        """Run ``n`` lock-free P-loops; return (operations, elapsed seconds)."""

    def run_bench(self, setting: BenchSetting) -> MeasurementRecord:
        ...


# --------------------------------------------------------------------- pinning

def _topology_key(cpu: int) -> tuple[int, int, int]:
    base = Path(f"/sys/devices/system/cpu/cpu{cpu}/topology")
    try:
        package = int((base / "physical_package_id").read_text())
        core = int((base / "core_id").read_text())
    except (OSError, ValueError):
        return (0, cpu, cpu)
    return (package, core, cpu)


def parse_cpu_list(text: str) -> list[int]:
    """Parse ``"0,2,4-7"`` into ``[0, 2, 4, 5, 6, 7]``, keeping the given order."""
    cpus = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            cpus.extend(range(int(lo), int(hi) + 1))
        else:
            cpus.append(int(part))
    if len(set(cpus)) != len(cpus):
        raise ValueError(f"duplicate CPU in list {text!r}")
    return cpus


def cpu_fill_order() -> list[int]:
    """CPUs to pin workers to, in order.

    ``$LOCKPERF_CPUS`` overrides; otherwise the allowed CPUs are sorted by
    (socket, core, cpu) so one socket fills up before the next is used.
    """
    override = os.environ.get(CPU_LIST_ENV)
    if override:
        return parse_cpu_list(override)
    if not hasattr(os, "sched_getaffinity"):
        raise PinningError("thread pinning is not supported on this platform")
    return sorted(os.sched_getaffinity(0), key=_topology_key)


# -------------------------------------------------------------------- machines

class HardwareMachine:
    def __init__(self, warmup_s: float = DEFAULT_WARMUP_S, cpus: Sequence[int] | None = None):
        self.warmup_s = warmup_s
        self._cpus = list(cpus) if cpus is not None else None

    def cpus(self, n: int) -> list[int]:
        order = self._cpus if self._cpus is not None else cpu_fill_order()
        if n > len(order):
            raise PinningError(
                f"{n} threads requested but only {len(order)} hardware threads available: {order}"
            )
        return order[:n]

    def _run(self, lock, n: int, c: int, p: int, duration_s: float):
        cpus = self.cpus(n)
        if not hasattr(os, "sched_setaffinity"):
            raise PinningError("thread pinning is not supported on this platform")
        control = locks.BenchControl()
        handles = [lock.register() if lock is not None else None for _ in range(n)]
        counts = [0] * n
        failures: list[str] = []
        ready = threading.Barrier(n + 1)

        def worker(i: int) -> None:
            try:
                os.sched_setaffinity(0, {cpus[i]})
            except OSError as exc:
                failures.append(f"cpu {cpus[i]}: {exc}")
                control.set_state(locks.STOP)
            ready.wait()
            if failures:
                return
            counts[i] = locks.run_until(lock, c, p, control, handles[i])

        threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(n)]
        for th in threads:
            th.start()
        ready.wait()
        if not failures:
            time.sleep(self.warmup_s)
            control.set_state(locks.MEASURE)
            start = time.perf_counter()
            time.sleep(duration_s)
            control.set_state(locks.STOP)
            elapsed = time.perf_counter() - start
        for th in threads:
            th.join()
        if failures:
            raise PinningError("could not pin worker threads: " + "; ".join(failures))
        return tuple(counts), elapsed, tuple(cpus)

    def run_parallel(self, n: int, p: int, duration_s: float) -> tuple[int, float]:
        counts, elapsed, _ = self._run(None, n, 0, p, duration_s)
        return sum(counts), elapsed

    def run_bench(self, setting: BenchSetting) -> MeasurementRecord:
        lock = locks.make_lock(setting.lock)
        counts, elapsed, cpus = self._run(
            lock, setting.n, setting.c, setting.p, setting.duration_s
        )
        log.info("bench %s pinned to cpus %s", setting, cpus)
        return MeasurementRecord(setting, sum(counts), elapsed, counts, cpus)


class SimulatedMachine:
    """Bench interface answered by the simulator with known constants."""

    def __init__(self, machine: MachineParams, warmup_ops: int = 10, measure_ops: int = 50):
        self.machine = machine
        self.warmup_ops = warmup_ops
        self.measure_ops = measure_ops

    def run_parallel(self, n: int, p: int, duration_s: float) -> tuple[int, float]:
        if p < 1:
            raise ValueError("p must be >= 1")
        # uniform scheduler: every process gets alpha work units per second
        ticks = int(self.machine.alpha * duration_s)
        return n * (ticks // p), float(duration_s)

    def run_bench(self, setting: BenchSetting) -> MeasurementRecord:
        if setting.lock != "clh":
            raise ValueError("the simulated machine only models the CLH lock")
        result = simulate(
            SimConfig(self.machine, setting.workload, self.warmup_ops, self.measure_ops)
        )
        ops = int(round(result.throughput * setting.duration_s))
        per_thread = _apportion(ops, result.per_process_ops)
        return MeasurementRecord(setting, ops, float(setting.duration_s), per_thread)


def _apportion(total: int, weights: Sequence[int]) -> tuple[int, ...]:
    """Split ``total`` proportionally to ``weights`` (largest remainder)."""
    wsum = sum(weights)
    exact = [total * w / wsum for w in weights]
    parts = [math.floor(e) for e in exact]
    order = sorted(range(len(weights)), key=lambda i: exact[i] - parts[i], reverse=True)
    for i in order[: total - sum(parts)]:
        parts[i] += 1
    return tuple(parts)


# ----------------------------------------------------------------- calibration

def calibrate_alpha(n: int, p: int, duration_s: float, machine: BenchMachine | None = None) -> float:
    """Work units per second per process, from ``n`` lock-free P-loops.

    alpha = F * P / (N * elapsed): F operations of P units each, spread over N
    processes running for ``elapsed`` seconds.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    machine = machine or HardwareMachine()
    ops, elapsed = machine.run_parallel(n, p, duration_s)
    if ops == 0:
        raise CalibrationError(
            "no operation completed; the work loop was probably optimized away"
        )
    return ops * p / (n * elapsed)


def _rel_weight(value: float) -> float:
    return 1.0 / (value * value)


def calibrate_costs(grid: Sequence[MeasurementRecord], alpha: float, *, max_iter: int = 50) -> CalibrationResult:
    """Fit W and R_I to measured throughputs for a known ``alpha``.

    Saturated points only reveal S = R_I + W (time per op = C + S); the
    unsaturated points (time per op = (P + 2W + C + S) / N) then split S.
    Regimes are assigned from the current estimate and refit until stable.
    """
    if not grid:
        raise IdentifiabilityError("empty measurement grid")
    pts = []
    for rec in grid:
        if rec.throughput <= 0:
            raise CalibrationError(f"non-positive throughput in {rec.setting}")
        wl = rec.workload
        pts.append((wl, alpha / rec.throughput))

    # per-op time never drops below C + S, so the smallest excess is a lower bound
    s = max(min(tau - wl.c for wl, tau in pts), 0.0)
    w = 0.0
    labels = None
    for _ in range(max_iter):
        new_labels = [
            wl.p + 2 * w <= (wl.n - 1) * (wl.c + s) for wl, _ in pts
        ]
        sat = [(wl, tau) for (wl, tau), lab in zip(pts, new_labels) if lab]
        unsat = [(wl, tau) for (wl, tau), lab in zip(pts, new_labels) if not lab]
        _check_identifiable(sat, unsat)
        wts = [_rel_weight(tau) for _, tau in sat]
        s = sum(wt * (tau - wl.c) for wt, (wl, tau) in zip(wts, sat)) / sum(wts)
        wts = [_rel_weight(wl.n * tau) for wl, tau in unsat]
        w = sum(
            wt * (wl.n * tau - wl.p - wl.c - s) / 2 for wt, (wl, tau) in zip(wts, unsat)
        ) / sum(wts)
        if new_labels == labels:
            break
        labels = new_labels
    if not s > 0:
        raise CalibrationError(f"fit produced a non-positive W + R_I ({s:.3g})")
    if not 0 <= w <= s:
        # noise on large-P points swamps 2W; S is still sound, the split is not
        log.warning("W estimate %.3g outside [0, %.3g]; clamped, the W/R_I split is unreliable", w, s)
        w = min(max(w, 0.0), s)
    r_i = s - w
    machine = MachineParams(alpha=alpha, w=w, r_i=r_i)
    errors = [
        (predict_clh(machine, wl).throughput - alpha / tau) / (alpha / tau) for wl, tau in pts
    ]
    residual = math.sqrt(sum(e * e for e in errors) / len(errors))
    cs = sorted({wl.c for wl, _ in pts})
    return CalibrationResult(
        machine,
        residual,
        source=f"{len(pts)} records, c in {cs}",
        saturated_points=sum(labels),
        unsaturated_points=len(pts) - sum(labels),
    )


def _check_identifiable(sat, unsat) -> None:
    missing = []
    if len({wl.c for wl, _ in sat}) < 2:
        missing.append("saturated-regime measurements at two or more distinct C values")
    if not unsat:
        missing.append("at least one unsaturated-regime measurement (needed to split W from R_I)")
    if missing:
        raise IdentifiabilityError("cannot identify W and R_I; grid lacks " + " and ".join(missing))


def run_bench(setting: BenchSetting, machine: BenchMachine | None = None) -> MeasurementRecord:
    return (machine or HardwareMachine()).run_bench(setting)


def fit_machine(
    machine: BenchMachine,
    *,
    n: int,
    cs: Sequence[int],
    xs: Sequence[float],
    duration_s: float,
    alpha_n: int = 1,
    alpha_p: int = 10_000,
    lock: str = "clh",
) -> tuple[CalibrationResult, list[MeasurementRecord]]:
    """Calibrate alpha, run the bench grid, and fit W and R_I to it."""
    alpha = calibrate_alpha(alpha_n, alpha_p, duration_s, machine)
    records = [
        machine.run_bench(BenchSetting(lock, n, c, x, duration_s)) for c in cs for x in xs
    ]
    return calibrate_costs(records, alpha), records
