"""Closed-form throughput predictors for coarse-grained CLH-locked operations.

All costs (C, P, W, R_I) are dimensionless work units; ``alpha`` converts work
units to seconds, so every predicted throughput is in operations per second.

The predictors never coerce their inputs to ``float``.  Passing
:class:`fractions.Fraction` values yields exact rational results, which is what
the boundary-continuity checks rely on.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from numbers import Real


class Regime(str, enum.Enum):
    UNSATURATED = "unsaturated"
    SATURATED = "saturated"


class ModelId(str, enum.Enum):
    CLH_ANALYTIC = "clh"
    QUEUE_MODEL = "queue"


@dataclass(frozen=True)
class MachineParams:
    """Calibrated machine constants.

    alpha : work units per second executed by one process
    w     : cost of a cache-line write or an uncontended swap
    r_i   : cost of reading a cache line in the Invalid state
    x     : upper bound on a contended swap; kept for startup modeling only
    """

    alpha: Real
    w: Real
    r_i: Real
    x: Real | None = None

    def __post_init__(self):
        if self.x is None:
            object.__setattr__(self, "x", self.w)
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        # zero costs are accepted so the queue model can be expressed as a
        # degenerate CLH machine
        if self.w < 0:
            raise ValueError(f"w must be non-negative, got {self.w}")
        if self.r_i < 0:
            raise ValueError(f"r_i must be non-negative, got {self.r_i}")
        if self.x < self.w:
            raise ValueError(f"x must be >= w, got x={self.x}, w={self.w}")


@dataclass(frozen=True)
class WorkloadParams:
    n: int
    c: int
    p: int

    def __post_init__(self):
        for name in ("n", "c", "p"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.c < 1:
            raise ValueError(f"c must be >= 1, got {self.c}")
        if self.p < 0:
            raise ValueError(f"p must be >= 0, got {self.p}")

    @classmethod
    def from_multiplier(cls, n: int, c: int, x) -> "WorkloadParams":
        """Build a workload with parallel section ``p = x * c`` (rounded to a work unit)."""
        return cls(n=n, c=c, p=int(round(x * c)))


@dataclass(frozen=True)
class Prediction:
    throughput: Real
    regime: Regime
    model_id: ModelId


def critical_cost(machine: MachineParams, workload: WorkloadParams) -> Real:
    """Per-operation work spent holding (or acknowledging) the lock: R_I + C + W."""
    return workload.c + machine.r_i + machine.w


def parallel_cost(machine: MachineParams, workload: WorkloadParams) -> Real:
    """Per-operation work outside the lock: set-true, parallel loop and swap."""
    return workload.p + 2 * machine.w


def classify_regime(machine: MachineParams, workload: WorkloadParams) -> Regime:
    # the tie belongs to the saturated branch; both branches agree there
    if parallel_cost(machine, workload) <= (workload.n - 1) * critical_cost(machine, workload):
        return Regime.SATURATED
    return Regime.UNSATURATED


def saturated_throughput(machine: MachineParams, workload: WorkloadParams) -> Real:
    return machine.alpha / critical_cost(machine, workload)


def unsaturated_throughput(machine: MachineParams, workload: WorkloadParams) -> Real:
    return machine.alpha * workload.n / (
        parallel_cost(machine, workload) + critical_cost(machine, workload)
    )


def predict_clh(machine: MachineParams, workload: WorkloadParams) -> Prediction:
    regime = classify_regime(machine, workload)
    if regime is Regime.SATURATED:
        throughput = saturated_throughput(machine, workload)
    else:
        throughput = unsaturated_throughput(machine, workload)
    return Prediction(throughput, regime, ModelId.CLH_ANALYTIC)


def predict_queue_model(alpha: Real, workload: WorkloadParams) -> Prediction:
    """Lock-agnostic queueing estimate ``alpha*N / (max(N - P/C, 1)*C + P)``.

    When the queue holds more than one process the denominator collapses to
    ``N*C``, so the result is returned in its reduced form ``alpha / C``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    n, c, p = workload.n, workload.c, workload.p
    # max(N - P/C, 1) > 1 exactly when (N - 1) * C > P; compared in integers
    if (n - 1) * c >= p:
        return Prediction(alpha / c, Regime.SATURATED, ModelId.QUEUE_MODEL)
    return Prediction(alpha * n / (c + p), Regime.UNSATURATED, ModelId.QUEUE_MODEL)


def knee_parallel(machine: MachineParams, n: int, c: int) -> Real:
    """Parallel-section size P at which the two CLH regimes meet."""
    return (n - 1) * (c + machine.r_i + machine.w) - 2 * machine.w


def knee_multiplier(machine: MachineParams, n: int, c: int) -> Real:
    """The knee expressed as the multiplier x = P / C."""
    return knee_parallel(machine, n, c) / c
