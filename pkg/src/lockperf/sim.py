"""Discrete-time simulator of N processes running the inlined CLH operation.

Every process advances one work unit per tick (uniform scheduler).  Per
operation a process goes through

    Swap (W) -> [WaitTrue read (R_I)] -> WaitFalse read (R_I) -> Crit (C)
    -> Release (W) -> SetTrue (W) -> Parallel (P) -> Swap ...

The WaitTrue read is only charged when the predecessor still holds the lock at
the first read.  A release completed at tick ``t`` becomes visible to waiters
from tick ``t + 1``.  Swaps finishing on the same tick enter the queue in
process-index order, so a run is fully deterministic.

The event loop runs in a compiled extension when one is built, and falls back
to a pure-Python implementation otherwise.  Set ``LOCKPERF_PURE_PYTHON=1`` to
force the fallback.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import NamedTuple

from lockperf import _simpy
from lockperf.model import MachineParams, Regime, WorkloadParams

_KERNELS = {"python": _simpy.run}
if not os.environ.get("LOCKPERF_PURE_PYTHON"):
    try:
        from lockperf import _simcore
    except ImportError:  # extension not built
        pass
    else:
        _KERNELS["compiled"] = _simcore.run

BACKEND = "compiled" if "compiled" in _KERNELS else "python"


class SimulationError(RuntimeError):
    pass


class Phase(enum.IntEnum):
    SWAP = _simpy.SWAP
    WAIT_TRUE = _simpy.WAIT_TRUE
    WAIT_FALSE = _simpy.WAIT_FALSE
    CRIT = _simpy.CRIT
    RELEASE = _simpy.RELEASE
    SET_TRUE = _simpy.SET_TRUE
    PARALLEL = _simpy.PARALLEL


@dataclass(frozen=True)
class SimConfig:
    machine: MachineParams
    workload: WorkloadParams
    warmup_ops: int = 10
    measure_ops: int = 50

    def __post_init__(self):
        if self.warmup_ops < 0:
            raise ValueError(f"warmup_ops must be >= 0, got {self.warmup_ops}")
        if self.measure_ops < 1:
            raise ValueError(f"measure_ops must be >= 1, got {self.measure_ops}")
        for name in ("w", "r_i"):
            if round(getattr(self.machine, name)) < 1:
                raise ValueError(f"the simulator needs {name} >= 1 work unit")

    @property
    def tick_costs(self) -> tuple[int, int]:
        """(W, R_I) rounded to whole ticks."""
        return int(round(self.machine.w)), int(round(self.machine.r_i))


class QueueEntry(NamedTuple):
    """One pass through the lock, in swap order."""

    process: int
    swap_done: int
    crit_start: int
    release_visible: int


@dataclass(frozen=True)
class SimResult:
    ticks: int
    total_ops: int
    throughput: float
    observed_regime: Regime
    per_process_ops: tuple[int, ...]
    window_start: int = 0
    trace: tuple[QueueEntry, ...] | None = None


def available_kernels() -> tuple[str, ...]:
    return tuple(_KERNELS)


def simulate(config: SimConfig, *, trace: bool = False, kernel: str | None = None) -> SimResult:
    run = _KERNELS[kernel or BACKEND]
    wl = config.workload
    w, r_i = config.tick_costs
    t0, t1, ops, per_proc, saw_idle, events = run(
        wl.n, wl.c, wl.p, w, r_i, config.warmup_ops, config.measure_ops, trace
    )
    ticks = t1 - t0
    if ticks <= 0 or ops <= 0:
        raise SimulationError(
            f"measurement window is empty (ticks={ticks}, ops={ops}); check warmup_ops"
        )
    return SimResult(
        ticks=ticks,
        total_ops=ops,
        throughput=ops * config.machine.alpha / ticks,
        observed_regime=Regime.SATURATED if saw_idle else Regime.UNSATURATED,
        per_process_ops=tuple(per_proc),
        window_start=t0,
        trace=tuple(QueueEntry(*e) for e in events) if trace else None,
    )


def observed_regime(result: SimResult) -> Regime:
    """Saturated iff some process idled in the lock queue during the window."""
    return result.observed_regime


def single_process_cycle(machine: MachineParams, workload: WorkloadParams) -> int:
    """Ticks per operation of an uncontended process: Swap+WaitFalse+C+Release+SetTrue+P."""
    w, r_i = int(round(machine.w)), int(round(machine.r_i))
    return w + r_i + workload.c + w + w + workload.p
