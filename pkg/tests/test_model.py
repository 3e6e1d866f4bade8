from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from lockperf.model import (
    MachineParams,
    ModelId,
    Regime,
    WorkloadParams,
    classify_regime,
    knee_multiplier,
    knee_parallel,
    predict_clh,
    predict_queue_model,
    saturated_throughput,
    unsaturated_throughput,
)
from oracles import clh_throughput, queue_throughput

M = MachineParams(alpha=3.5e5, w=40, r_i=80)


def wl(n, c, p):
    return WorkloadParams(n, c, p)


@pytest.mark.parametrize(
    "n,c,p,expected",
    [
        (39, 100, 100, Regime.SATURATED),
        (1, 100, 100, Regime.UNSATURATED),
        (2, 100, 140, Regime.SATURATED),  # exact tie
        (2, 100, 141, Regime.UNSATURATED),
    ],
)
def test_classify_examples(n, c, p, expected):
    assert classify_regime(M, wl(n, c, p)) is expected


def test_predict_clh_examples():
    sat = predict_clh(M, wl(39, 100, 100))
    assert sat.regime is Regime.SATURATED
    assert sat.model_id is ModelId.CLH_ANALYTIC
    assert sat.throughput == pytest.approx(1590.909090, rel=1e-9)

    unsat = predict_clh(M, wl(5, 100, 15000))
    assert unsat.regime is Regime.UNSATURATED
    assert unsat.throughput == pytest.approx(1750000 / 15300, rel=1e-12)
    assert round(unsat.throughput, 2) == 114.38

    tie = wl(2, 100, 140)
    assert saturated_throughput(M, tie) == unsaturated_throughput(M, tie)
    assert predict_clh(M, tie).throughput == pytest.approx(350000 / 220)


@pytest.mark.parametrize(
    "n,c,p,expected",
    [(39, 100, 100, 3500.0), (2, 100, 1000, 700000 / 1100), (1, 100, 0, 3500.0)],
)
def test_queue_examples(n, c, p, expected):
    pred = predict_queue_model(3.5e5, wl(n, c, p))
    assert pred.throughput == pytest.approx(expected, rel=1e-12)
    assert pred.model_id is ModelId.QUEUE_MODEL


def test_knees():
    assert knee_multiplier(M, 39, 100) == pytest.approx(82.8)
    assert knee_multiplier(M, 39, 500) == pytest.approx(46.96)
    assert knee_multiplier(M, 39, 5000) == pytest.approx(38.896)
    exact = MachineParams(alpha=Fraction(350000), w=Fraction(40), r_i=Fraction(80))
    assert knee_multiplier(exact, 39, 100) == Fraction(828, 10)
    assert knee_parallel(exact, 2, 100) == 140


@pytest.mark.parametrize(
    "kwargs",
    [dict(alpha=0, w=1, r_i=1), dict(alpha=1, w=-1, r_i=1),
     dict(alpha=1, w=1, r_i=-1), dict(alpha=1, w=5, r_i=1, x=4)],
)
def test_machine_rejects(kwargs):
    with pytest.raises(ValueError):
        MachineParams(**kwargs)


def test_machine_swap_bound_defaults_to_w():
    assert MachineParams(alpha=1, w=7, r_i=1).x == 7


@pytest.mark.parametrize("args,exc", [((0, 1, 0), ValueError), ((1, 0, 0), ValueError),
                                      ((1, 1, -1), ValueError), ((1.5, 1, 0), TypeError),
                                      ((True, 1, 0), TypeError)])
def test_workload_rejects(args, exc):
    with pytest.raises(exc):
        WorkloadParams(*args)


def test_from_multiplier_rounds():
    assert WorkloadParams.from_multiplier(3, 500, 46.96).p == 23480
    assert WorkloadParams.from_multiplier(3, 3, 0.5).p == 2


def test_queue_rejects_bad_alpha():
    with pytest.raises(ValueError):
        predict_queue_model(0, wl(1, 1, 1))


# ----------------------------------------------------------------- properties

pos = st.integers(min_value=1, max_value=10_000)
machines = st.builds(
    MachineParams,
    alpha=st.fractions(min_value=1, max_value=10**7),
    w=st.integers(0, 500).map(Fraction),
    r_i=st.integers(0, 500).map(Fraction),
)
workloads = st.builds(WorkloadParams, n=st.integers(1, 64), c=pos, p=st.integers(0, 10**6))


@given(machines, workloads)
def test_matches_independent_formula(m, w):
    expected, regime = clh_throughput(m.alpha, m.w, m.r_i, w.n, w.c, w.p)
    pred = predict_clh(m, w)
    assert pred.throughput == expected
    assert pred.regime.value == regime


@given(machines, workloads, st.integers(0, 10**6))
def test_saturated_independent_of_n_and_p(m, w, p2):
    w2 = WorkloadParams(w.n + 1, w.c, min(w.p, p2))
    assume(classify_regime(m, w) is Regime.SATURATED)
    assert classify_regime(m, w2) is Regime.SATURATED
    assert predict_clh(m, w).throughput == predict_clh(m, w2).throughput


@given(machines, workloads)
def test_unsaturated_linear_in_n(m, w):
    assume(classify_regime(m, w) is Regime.UNSATURATED)
    base = unsaturated_throughput(m, WorkloadParams(1, w.c, w.p))
    assert predict_clh(m, w).throughput == base * w.n


@given(machines, st.integers(1, 64), pos, st.integers(0, 10**5), st.integers(1, 1000))
def test_non_increasing_in_p(m, n, c, p, dp):
    a = predict_clh(m, WorkloadParams(n, c, p)).throughput
    b = predict_clh(m, WorkloadParams(n, c, p + dp)).throughput
    assert b <= a


@given(machines, st.integers(1, 63), pos, st.integers(0, 10**5))
def test_non_decreasing_in_n(m, n, c, p):
    a = predict_clh(m, WorkloadParams(n, c, p)).throughput
    b = predict_clh(m, WorkloadParams(n + 1, c, p)).throughput
    assert b >= a


@given(machines, workloads, st.integers(2, 50))
def test_scale_invariance(m, w, k):
    # scaling every cost by k and alpha by k leaves throughput unchanged
    scaled_m = MachineParams(alpha=m.alpha * k, w=m.w * k, r_i=m.r_i * k)
    scaled_w = WorkloadParams(w.n, w.c * k, w.p * k)
    assert predict_clh(scaled_m, scaled_w).throughput == predict_clh(m, w).throughput


@given(st.fractions(min_value=1, max_value=10**7), workloads)
def test_queue_matches_formula_and_reduction(alpha, w):
    q = predict_queue_model(alpha, w)
    assert q.throughput == queue_throughput(alpha, w.n, w.c, w.p)
    # with W = R_I = 0 the two models share one boundary, (N-1)C >= P
    zero = MachineParams(alpha=alpha, w=0, r_i=0)
    assert predict_clh(zero, w).throughput == q.throughput


@given(
    st.fractions(min_value=1, max_value=10**7),
    st.integers(1, 500), st.integers(0, 500), st.integers(2, 64), pos,
)
def test_boundary_continuity_exact(alpha, w, r_i, n, c):
    m = MachineParams(alpha=alpha, w=Fraction(w), r_i=Fraction(r_i))
    p = knee_parallel(m, n, c)
    assume(p >= 0)
    point = WorkloadParams(n, c, int(p))
    assert classify_regime(m, point) is Regime.SATURATED
    assert saturated_throughput(m, point) == unsaturated_throughput(m, point)
