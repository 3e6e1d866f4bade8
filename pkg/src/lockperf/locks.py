"""Runnable CLH and spin locks plus the coarse-grained operation loop.

The CLH lock follows the inlined lock/unlock sequence literally: swap my node
into ``head``, spin while the returned node is locked, run the critical loop,
clear my node, adopt the predecessor's node and set it locked for the next
operation.  ``SpinLock`` is a compare-and-set word kept only for measurement
comparison.

A native core (``_lockcore``) is used when built; its loops run without the
GIL.  The pure-Python fallback is functionally equivalent but serializes on the
GIL, so its timings say nothing about the hardware.
"""
from __future__ import annotations

import os
import statistics
import threading
import time
from dataclasses import dataclass

from lockperf import _lockpy

_BACKENDS = {"python": _lockpy}
if not os.environ.get("LOCKPERF_PURE_PYTHON"):
    try:
        from lockperf import _lockcore
    except ImportError:  # extension not built
        pass
    else:
        _BACKENDS["compiled"] = _lockcore

BACKEND = "compiled" if "compiled" in _BACKENDS else "python"
_impl = _BACKENDS[BACKEND]

ClhLock = _impl.ClhLock
SpinLock = _impl.SpinLock
BenchControl = _impl.BenchControl
SharedCounter = _impl.SharedCounter
OrderRecorder = _impl.OrderRecorder
work = _impl.work
run_operation = _impl.run_operation
run_operations = _impl.run_operations
run_until = _impl.run_until
hammer = _impl.hammer
run_recorded = _impl.run_recorded
WARMUP, MEASURE, STOP = _impl.WARMUP, _impl.MEASURE, _impl.STOP

LOCK_KINDS = ("clh", "spin")


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def backend(name: str | None = None):
    """Return the implementation module for ``name`` (default: the active one)."""
    return _BACKENDS[name or BACKEND]


def make_lock(kind: str, impl=None):
    impl = impl or _impl
    if kind == "clh":
        return impl.ClhLock()
    if kind == "spin":
        return impl.SpinLock()
    raise ValueError(f"unknown lock kind {kind!r}; expected one of {LOCK_KINDS}")


@dataclass(frozen=True)
class WorkLoop:
    """``iterations`` work units of the nop loop."""

    iterations: int

    def __call__(self) -> None:
        work(self.iterations)

    @staticmethod
    def time_per_unit(k: int, repeats: int = 5) -> float:
        """Best-of-``repeats`` wall time of one iteration, measured over ``k`` iterations."""
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            work(k)
            best = min(best, time.perf_counter() - start)
        return best / k

    @staticmethod
    def _timed(k: int) -> float:
        start = time.perf_counter()
        work(k)
        return time.perf_counter() - start

    @classmethod
    def linearity(cls, small: int = 100_000, factor: int = 10, repeats: int = 9) -> float:
        """Ratio of per-iteration cost at ``small * factor`` vs ``small`` iterations.

        1.0 means perfectly linear.  Each large run is bracketed by two small
        runs and the median bracket ratio is returned, which cancels the slow
        drift of shared or frequency-scaled hosts.
        """
        ratios = []
        for _ in range(repeats):
            before = cls._timed(small)
            big = cls._timed(small * factor)
            after = cls._timed(small)
            ratios.append(2 * big / (factor * (before + after)))
        return statistics.median(ratios)


def _run_threads(targets) -> None:
    errors = []

    def wrap(fn):
        def runner():
            try:
                fn()
            except BaseException as exc:  # re-raised in the caller
                errors.append(exc)
        return runner

    threads = [threading.Thread(target=wrap(fn), daemon=True) for fn in targets]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise errors[0]


def mutex_stress(kind: str, threads: int, ops: int, c: int = 1, impl=None) -> int:
    """Run ``threads * ops`` lock-protected increments; return the final counter.

    Each increment reads the shared counter, runs the critical loop and writes
    back, so any overlap of critical sections loses updates.
    """
    impl = impl or _impl
    lock = make_lock(kind, impl)
    counter = impl.SharedCounter()
    handles = [lock.register() for _ in range(threads)]
    _run_threads([
        (lambda h=h: impl.hammer(lock, ops, c, counter, h)) for h in handles
    ])
    return counter.value


def record_clh_order(threads: int, ops: int, c: int = 10, p: int = 10, impl=None):
    """Run instrumented CLH operations; return (swap order, acquisition order)."""
    impl = impl or _impl
    lock = impl.ClhLock()
    recorder = impl.OrderRecorder()
    handles = [lock.register() for _ in range(threads)]
    _run_threads([
        (lambda tag=tag, h=h: impl.run_recorded(lock, ops, c, p, recorder, tag, h))
        for tag, h in enumerate(handles)
    ])
    return recorder.swap_order, recorder.acquisition_order
