# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop for the CLH simulator; semantics identical to _simpy.run."""

from libc.stdlib cimport malloc, realloc, free

cdef enum:
    SWAP = 0
    WAIT_TRUE = 1
    WAIT_FALSE = 2
    CRIT = 3
    RELEASE = 4
    SET_TRUE = 5
    PARALLEL = 6

cdef long long NEVER = -1


cdef struct Proc:
    int phase
    long long rem
    long long entry
    bint waited
    bint idle
    long long done
    long long window


cdef struct Entry:
    long long proc
    long long swap_done
    long long crit_start
    long long visible


cdef class _Queue:
    """Growable array of queue entries in swap order."""
    cdef Entry* data
    cdef Py_ssize_t size
    cdef Py_ssize_t cap

    def __cinit__(self, Py_ssize_t cap):
        self.cap = cap if cap > 16 else 16
        self.size = 0
        self.data = <Entry*> malloc(self.cap * sizeof(Entry))
        if self.data == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.data)

    cdef Py_ssize_t push(self, long long proc, long long t) except -1:
        cdef Entry* grown
        if self.size == self.cap:
            grown = <Entry*> realloc(self.data, 2 * self.cap * sizeof(Entry))
            if grown == NULL:
                raise MemoryError()
            self.data = grown
            self.cap *= 2
        self.data[self.size].proc = proc
        self.data[self.size].swap_done = t
        self.data[self.size].crit_start = NEVER
        self.data[self.size].visible = NEVER
        self.size += 1
        return self.size - 1


def run(int n, long long c, long long p, long long w, long long r_i,
        long long warmup, long long measure, bint trace=False):
    cdef long long target = warmup + measure
    cdef Proc* procs = <Proc*> malloc(n * sizeof(Proc))
    if procs == NULL:
        raise MemoryError()
    cdef _Queue queue = _Queue(n * (target + 2))
    cdef Proc* pr
    cdef int i
    cdef long long t = 0
    cdef long long t0 = 0 if warmup == 0 else NEVER
    cdef long long warm_left = n if warmup > 0 else 0
    cdef long long finished = 0
    cdef long long window_ops = 0
    cdef long long step, pred, vis
    cdef bint saw_idle = False
    cdef bint any_idle

    for i in range(n):
        procs[i].phase = SWAP
        procs[i].rem = w
        procs[i].entry = 0
        procs[i].waited = False
        procs[i].idle = False
        procs[i].done = 0
        procs[i].window = 0

    try:
        while True:
            for i in range(n):
                pr = &procs[i]
                if pr.rem or pr.idle:
                    continue
                if pr.phase == SWAP:
                    pr.entry = queue.push(i, t)
                    pr.phase = WAIT_TRUE
                    pr.waited = False
                elif pr.phase == WAIT_TRUE:
                    pass
                elif pr.phase == WAIT_FALSE:
                    pr.phase = CRIT
                    pr.rem = c
                    queue.data[pr.entry].crit_start = t
                elif pr.phase == CRIT:
                    pr.phase = RELEASE
                    pr.rem = w
                elif pr.phase == RELEASE:
                    queue.data[pr.entry].visible = t
                    pr.phase = SET_TRUE
                    pr.rem = w
                else:
                    if pr.phase == SET_TRUE:
                        pr.phase = PARALLEL
                        pr.rem = p
                    if pr.rem == 0:
                        pr.done += 1
                        if t0 != NEVER and t > t0:
                            window_ops += 1
                            pr.window += 1
                        if pr.done == warmup:
                            warm_left -= 1
                            if warm_left == 0:
                                t0 = t
                        if pr.done == target:
                            finished += 1
                        pr.phase = SWAP
                        pr.rem = w

            if finished == n:
                break

            for i in range(n):
                pr = &procs[i]
                if pr.phase != WAIT_TRUE or pr.rem:
                    continue
                pred = pr.entry - 1
                if pred < 0:
                    vis = 0
                else:
                    vis = queue.data[pred].visible
                if vis != NEVER and vis <= t:
                    pr.phase = WAIT_FALSE
                    pr.rem = r_i
                    pr.idle = False
                elif not pr.waited:
                    pr.waited = True
                    pr.rem = r_i
                else:
                    pr.idle = True

            step = 0
            any_idle = False
            for i in range(n):
                if procs[i].idle:
                    any_idle = True
                elif step == 0 or procs[i].rem < step:
                    step = procs[i].rem
            if step == 0:
                raise RuntimeError(
                    f"simulator stalled at tick {t}: every process is waiting")
            if any_idle and t0 != NEVER:
                saw_idle = True
            for i in range(n):
                if not procs[i].idle:
                    procs[i].rem -= step
            t += step

        per_proc = [procs[i].window for i in range(n)]
        events = None
        if trace:
            events = [
                [queue.data[k].proc, queue.data[k].swap_done,
                 queue.data[k].crit_start, queue.data[k].visible]
                for k in range(queue.size)
            ]
        return t0, t, window_ops, per_proc, saw_idle, events
    finally:
        free(procs)
