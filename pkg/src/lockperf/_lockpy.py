"""Pure-Python CLH and spin locks, used when the native core is not built.

CPython exposes no atomic exchange or compare-and-set on plain attributes, so
those two instructions are emulated with a private ``threading.Lock`` held
only for the duration of the instruction.

Busy-waiting under the GIL is erratic: a spinner keeps winning the GIL back
from the thread it waits for.  A CLH node therefore carries an Event that
mirrors its ``locked`` flag, and a waiter sleeps on its predecessor's Event
instead of polling.  Swap order, the wait on the predecessor node and node
recycling are the same as in the native lock.
"""
import threading
import time

BACKEND = "python"

WARMUP = 0
MEASURE = 1
STOP = 2

_YIELD_SPINS = 8
_BACKOFF_S = 1e-5


def _relax(spins):
    # after a few GIL-only yields, really sleep: a spinner that merely drops
    # the GIL tends to win it straight back from the holder
    if spins < _YIELD_SPINS:
        time.sleep(0)
    else:
        time.sleep(_BACKOFF_S)


class _Node:
    __slots__ = ("_free",)

    def __init__(self, locked):
        self._free = threading.Event()
        if not locked:
            self._free.set()

    @property
    def locked(self):
        return not self._free.is_set()

    @locked.setter
    def locked(self, value):
        if value:
            self._free.clear()
        else:
            self._free.set()

    def wait_unlocked(self):
        self._free.wait()


class _AtomicRef:
    __slots__ = ("_value", "_instr")

    def __init__(self, value):
        self._value = value
        self._instr = threading.Lock()

    def get_and_set(self, value):
        with self._instr:
            old = self._value
            self._value = value
            return old


class _AtomicWord:
    __slots__ = ("value", "_instr")

    def __init__(self, value=0):
        self.value = value
        self._instr = threading.Lock()

    def compare_and_set(self, expect, update):
        with self._instr:
            if self.value == expect:
                self.value = update
                return True
            return False


class ClhHandle:
    __slots__ = ("lock", "node", "pred")

    def __init__(self, lock, node):
        self.lock = lock
        self.node = node
        self.pred = None


class ClhLock:
    def __init__(self):
        self._head = _AtomicRef(_Node(False))
        self._registered = 0

    def register(self):
        self._registered += 1
        return ClhHandle(self, _Node(True))

    def acquire(self, handle):
        pred = self._head.get_and_set(handle.node)
        pred.wait_unlocked()
        handle.pred = pred

    def release(self, handle):
        handle.node.locked = False
        handle.node = handle.pred
        handle.node.locked = True
        handle.pred = None

    @property
    def node_count(self):
        return self._registered + 1


class SpinLock:
    def __init__(self):
        self._word = _AtomicWord(0)

    def register(self):
        return None

    def acquire(self, handle=None):
        spins = 0
        while not self._word.compare_and_set(0, 1):
            spins += 1
            _relax(spins)

    def release(self, handle=None):
        self._word.value = 0


class BenchControl:
    def __init__(self):
        self.state = WARMUP

    def set_state(self, state):
        self.state = state


class SharedCounter:
    def __init__(self):
        self.value = 0


class OrderRecorder:
    def __init__(self):
        self._guard = threading.Lock()
        self.swaps = []
        self.acquisitions = []

    @property
    def swap_order(self):
        return list(self.swaps)

    @property
    def acquisition_order(self):
        return list(self.acquisitions)


class _Sink:
    value = 0


_sink = _Sink()


def work(k):
    sink = _sink
    for i in range(k):
        sink.value = i


def _check(lock):
    if lock is not None and not isinstance(lock, (ClhLock, SpinLock)):
        raise TypeError(f"unsupported lock type {type(lock).__name__}")


def _handle(lock, handle):
    if isinstance(lock, ClhLock) and handle is None:
        return lock.register()
    return handle


def run_operations(lock, c, p, count, handle=None):
    _check(lock)
    handle = _handle(lock, handle)
    for _ in range(count):
        if lock is not None:
            lock.acquire(handle)
            work(c)
            lock.release(handle)
        else:
            work(c)
        work(p)


def run_operation(lock, c, p, handle=None):
    run_operations(lock, c, p, 1, handle)


def run_until(lock, c, p, control, handle=None):
    _check(lock)
    handle = _handle(lock, handle)
    counted = 0
    while True:
        if lock is not None:
            lock.acquire(handle)
            work(c)
            lock.release(handle)
        else:
            work(c)
        work(p)
        state = control.state
        if state == MEASURE:
            counted += 1
        elif state == STOP:
            return counted


def hammer(lock, ops, c, counter, handle=None):
    if lock is None:
        raise TypeError("hammer needs a lock")
    _check(lock)
    handle = _handle(lock, handle)
    for _ in range(ops):
        lock.acquire(handle)
        seen = counter.value
        work(c)
        counter.value = seen + 1
        lock.release(handle)


def run_recorded(lock, ops, c, p, recorder, tag, handle=None):
    if not isinstance(lock, ClhLock):
        raise TypeError("run_recorded needs a ClhLock")
    handle = _handle(lock, handle)
    head = lock._head
    for _ in range(ops):
        with recorder._guard:
            pred = head.get_and_set(handle.node)
            recorder.swaps.append(tag)
        pred.wait_unlocked()
        handle.pred = pred
        with recorder._guard:
            recorder.acquisitions.append(tag)
        work(c)
        lock.release(handle)
        work(p)
