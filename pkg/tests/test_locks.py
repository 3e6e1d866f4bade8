import statistics
import threading
import time

import pytest

from lockperf import locks

BACKENDS = locks.available_backends()
# the GIL-bound fallback is far slower; keep its counts small
OPS = {"compiled": 20_000, "python": 2_000}


@pytest.fixture(params=BACKENDS)
def impl(request):
    return locks.backend(request.param), OPS[request.param]


@pytest.mark.parametrize("kind", locks.LOCK_KINDS)
def test_counter_exact(impl, kind):
    mod, ops = impl
    assert locks.mutex_stress(kind, 4, ops, c=3, impl=mod) == 4 * ops


def test_clh_fifo(impl):
    mod, ops = impl
    swaps, acquisitions = locks.record_clh_order(4, ops // 10, impl=mod)
    assert len(swaps) == 4 * (ops // 10)
    assert swaps == acquisitions


def test_make_lock(impl):
    mod, _ = impl
    assert isinstance(locks.make_lock("clh", mod), mod.ClhLock)
    assert isinstance(locks.make_lock("spin", mod), mod.SpinLock)
    with pytest.raises(ValueError):
        locks.make_lock("mcs", mod)


def test_clh_recycles_nodes(impl):
    mod, _ = impl
    lock = mod.ClhLock()
    handles = [lock.register() for _ in range(3)]
    for h in handles * 5:
        mod.run_operation(lock, 1, 1, h)
    # one dummy node plus one per registered thread, regardless of op count
    assert lock.node_count == 4


def test_run_until_counts_measure_phase(impl):
    mod, _ = impl
    lock = mod.ClhLock()
    control = mod.BenchControl()
    result = {}
    th = threading.Thread(target=lambda: result.setdefault("n", mod.run_until(lock, 10, 10, control)))
    th.start()
    time.sleep(0.05)
    control.set_state(mod.MEASURE)
    time.sleep(0.1)
    control.set_state(mod.STOP)
    th.join(5)
    assert not th.is_alive()
    assert result["n"] > 0


def test_lock_free_operations(impl):
    mod, _ = impl
    mod.run_operations(None, 5, 5, 100)
    with pytest.raises(TypeError):
        mod.hammer(None, 1, 1, mod.SharedCounter())
    with pytest.raises(TypeError):
        mod.run_operations(object(), 1, 1, 1)


@pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
def test_uncontended_liveness_and_linear_time():
    mod = locks.backend("compiled")
    lock = mod.ClhLock()
    h = lock.register()

    def timed(count):
        start = time.perf_counter()
        mod.run_operations(lock, 100, 100, count, h)
        return time.perf_counter() - start

    # the host drifts between fast and slow phases, so each 10^6-op run is
    # bracketed by two 2*10^5-op runs and the per-bracket ratios are pooled
    ratios = []
    for _ in range(15):
        before, big, after = timed(200_000), timed(1_000_000), timed(200_000)
        ratios.append(big / (2.5 * (before + after)))
    assert statistics.median(ratios) == pytest.approx(1.0, rel=0.05)


@pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
def test_work_loop_linear():
    assert 0.95 <= locks.WorkLoop.linearity(small=200_000) <= 1.05
