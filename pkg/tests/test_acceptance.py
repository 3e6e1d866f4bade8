"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (also collected into the
pytest terminal summary) and then asserts.  Run alone with
``pytest tests/test_acceptance.py -v -s``.
"""
import random
import time
from fractions import Fraction

import pytest

from conftest import ACCEPTANCE_LINES
from lockperf import harness, locks, sim
from lockperf.model import (
    MachineParams,
    Regime,
    WorkloadParams,
    knee_multiplier,
    knee_parallel,
    predict_clh,
    predict_queue_model,
    saturated_throughput,
    unsaturated_throughput,
)

REF_MACHINE = MachineParams(alpha=3.5e5, w=40, r_i=80)


def verdict(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_oracle_agreement():
    start = time.perf_counter()
    worst, checked, skipped = 0.0, 0, 0
    for n in (2, 5, 10, 20, 39):
        for c in (100, 500):
            knee = knee_multiplier(REF_MACHINE, n, c)
            for x in range(1, 142, 10):
                if abs(x - knee) <= 10:
                    skipped += 1
                    continue
                wl = WorkloadParams.from_multiplier(n, c, x)
                res = sim.simulate(sim.SimConfig(REF_MACHINE, wl, warmup_ops=10, measure_ops=50))
                pred = predict_clh(REF_MACHINE, wl).throughput
                worst = max(worst, abs(res.throughput - pred) / pred)
                checked += 1
    elapsed = time.perf_counter() - start
    verdict(
        "oracle agreement",
        worst <= 0.02 and elapsed < 60,
        f"{checked} points ({skipped} boundary-adjacent skipped), max rel error "
        f"{worst:.4%} <= 2%, {elapsed:.1f}s < 60s [{sim.BACKEND} kernel]",
    )


def test_boundary_continuity():
    rng = random.Random(20240601)
    bad = 0
    for _ in range(100):
        m = MachineParams(
            alpha=Fraction(rng.randint(1, 10**9), rng.randint(1, 1000)),
            w=Fraction(rng.randint(1, 500)),
            r_i=Fraction(rng.randint(0, 500)),
        )
        n, c = rng.randint(2, 128), rng.randint(1, 20_000)
        p = knee_parallel(m, n, c)
        wl = WorkloadParams(n, c, int(p))
        if saturated_throughput(m, wl) != unsaturated_throughput(m, wl):
            bad += 1
    verdict("boundary continuity", bad == 0, f"{100 - bad}/100 tuples with exactly equal branches")


def test_knee_location():
    expected = {100: Fraction("82.8"), 500: Fraction("46.96"), 5000: Fraction("38.896")}
    exact = MachineParams(alpha=Fraction(350000), w=Fraction(40), r_i=Fraction(80))
    details, ok = [], True
    for c, want in expected.items():
        knee = knee_multiplier(exact, 39, c)
        lo = int(knee) - 3
        flip = None
        for x in range(lo, lo + 8):
            wl = WorkloadParams.from_multiplier(39, c, x)
            res = sim.simulate(sim.SimConfig(REF_MACHINE, wl))
            if res.observed_regime is Regime.UNSATURATED:
                flip = x
                break
        good = knee == want and flip is not None and abs(flip - knee) <= 1
        ok &= good
        details.append(f"C={c} x*={float(knee):g} sim flip at x={flip}")
    verdict("knee location", ok, "; ".join(details))


def test_mutual_exclusion():
    start = time.perf_counter()
    clh = locks.mutex_stress("clh", 8, 100_000)
    spin = locks.mutex_stress("spin", 8, 100_000)
    swaps, acquisitions = locks.record_clh_order(4, 5_000)
    elapsed = time.perf_counter() - start
    ok = clh == 800_000 and spin == 800_000 and swaps == acquisitions and elapsed < 30
    verdict(
        "mutual exclusion",
        ok,
        f"clh={clh} spin={spin} fifo={'yes' if swaps == acquisitions else 'no'} "
        f"({len(swaps)} recorded), {elapsed:.1f}s < 30s [{locks.BACKEND} locks]",
    )


def test_calibration_round_trip():
    fake = harness.SimulatedMachine(REF_MACHINE)
    alpha = harness.calibrate_alpha(4, 1000, 5, fake)
    records = [
        fake.run_bench(harness.BenchSetting("clh", 4, c, x, 5))
        for c in (100, 500, 1000)
        for x in (1, 2, 5, 20, 50, 150)
    ]
    fit = harness.calibrate_costs(records, alpha).machine
    ea = abs(alpha - 3.5e5) / 3.5e5
    ew, er = abs(fit.w - 40) / 40, abs(fit.r_i - 80) / 80
    verdict(
        "calibration round-trip",
        ea <= 0.01 and ew <= 0.10 and er <= 0.10,
        f"alpha={alpha:.6g} ({ea:.2%}), W={fit.w:.3f} ({ew:.2%}), R_I={fit.r_i:.3f} ({er:.2%})",
    )


@pytest.mark.parametrize("alpha", [3.5e5, Fraction(350000, 3)], ids=["float", "fraction"])
def test_queue_clh_reduction(alpha):
    rng = random.Random(7)
    zero = MachineParams(alpha=alpha, w=0, r_i=0)
    points, mismatches = 0, 0
    while points < 200:
        n, c, p = rng.randint(1, 64), rng.randint(1, 10_000), rng.randint(0, 10**6)
        if (n - 1) * c == p:
            continue  # boundary point
        wl = WorkloadParams(n, c, p)
        q, k = predict_queue_model(alpha, wl), predict_clh(zero, wl)
        if q.throughput != k.throughput or q.regime != k.regime:
            mismatches += 1
        points += 1
    verdict(
        f"queue/CLH reduction ({type(alpha).__name__} alpha)",
        mismatches == 0,
        f"{points - mismatches}/{points} points exactly equal",
    )
