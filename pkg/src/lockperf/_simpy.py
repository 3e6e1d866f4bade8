"""Pure-Python event loop for the CLH simulator.

Mirrors ``_simcore.pyx`` step for step; the two must produce identical output.
Time advances in jumps to the next phase completion, which is equivalent to
stepping every process one work unit per tick because nothing can change
between completions.
"""

SWAP, WAIT_TRUE, WAIT_FALSE, CRIT, RELEASE, SET_TRUE, PARALLEL = range(7)

_NEVER = -1


def run(n, c, p, w, r_i, warmup, measure, trace=False):
    """Simulate ``n`` processes until each completed ``warmup + measure`` ops.

    Returns ``(t0, t1, window_ops, per_process, saw_idle, events)`` where the
    measurement window is the tick interval ``[t0, t1)``; ``events`` is a list
    of ``(proc, swap_done, crit_start, release_visible)`` per queue entry when
    ``trace`` is set, else ``None``.
    """
    target = warmup + measure
    phase = [SWAP] * n
    rem = [w] * n
    entry = [0] * n
    waited = [False] * n      # a WaitTrue read was issued for the current op
    idle = [False] * n
    done = [0] * n
    window = [0] * n

    visible = []              # per queue entry: tick its release becomes visible
    events = [] if trace else None

    t = 0
    t0 = 0 if warmup == 0 else _NEVER
    warm_left = n if warmup > 0 else 0
    finished = 0
    window_ops = 0
    saw_idle = False

    while True:
        # phase completions, in process-index order (serializes same-tick swaps)
        for i in range(n):
            if rem[i] or idle[i]:
                continue
            ph = phase[i]
            if ph == SWAP:
                entry[i] = len(visible)
                visible.append(_NEVER)
                if trace:
                    events.append([i, t, _NEVER, _NEVER])
                phase[i] = WAIT_TRUE
                waited[i] = False
            elif ph == WAIT_TRUE:
                pass
            elif ph == WAIT_FALSE:
                phase[i] = CRIT
                rem[i] = c
                if trace:
                    events[entry[i]][2] = t
            elif ph == CRIT:
                phase[i] = RELEASE
                rem[i] = w
            elif ph == RELEASE:
                visible[entry[i]] = t
                if trace:
                    events[entry[i]][3] = t
                phase[i] = SET_TRUE
                rem[i] = w
            else:
                if ph == SET_TRUE:
                    phase[i] = PARALLEL
                    rem[i] = p
                if rem[i] == 0:
                    done[i] += 1
                    if t0 != _NEVER and t > t0:
                        window_ops += 1
                        window[i] += 1
                    if done[i] == warmup:
                        warm_left -= 1
                        if warm_left == 0:
                            t0 = t
                    if done[i] == target:
                        finished += 1
                    phase[i] = SWAP
                    rem[i] = w

        if finished == n:
            break

        # lock-flag reads for processes sitting in the wait loop
        for i in range(n):
            if phase[i] != WAIT_TRUE or rem[i]:
                continue
            pred = entry[i] - 1
            free = pred < 0 or (visible[pred] != _NEVER and visible[pred] <= t)
            if free:
                phase[i] = WAIT_FALSE
                rem[i] = r_i
                idle[i] = False
            elif not waited[i]:
                waited[i] = True
                rem[i] = r_i
            else:
                idle[i] = True

        step = 0
        any_idle = False
        for i in range(n):
            if idle[i]:
                any_idle = True
            elif step == 0 or rem[i] < step:
                step = rem[i]
        if step == 0:
            raise RuntimeError(f"simulator stalled at tick {t}: every process is waiting")
        if any_idle and t0 != _NEVER:
            saw_idle = True
        for i in range(n):
            if not idle[i]:
                rem[i] -= step
        t += step

    return t0, t, window_ops, window, saw_idle, events
