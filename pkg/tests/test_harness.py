import os
import random

import pytest

from lockperf import harness
from lockperf.harness import (
    BenchSetting,
    CalibrationError,
    HardwareMachine,
    IdentifiabilityError,
    MeasurementRecord,
    PinningError,
    SimulatedMachine,
    calibrate_alpha,
    calibrate_costs,
)
from lockperf.model import MachineParams, WorkloadParams, predict_clh

TRUTH = MachineParams(alpha=3.5e5, w=40, r_i=80)
FAKE = SimulatedMachine(TRUTH)


def synthetic(cs, xs, n=4, noise=0.0, seed=0):
    """Records whose throughput is exactly (or noisily) the model's prediction."""
    rng = random.Random(seed)
    out = []
    for c in cs:
        for x in xs:
            s = BenchSetting("clh", n, c, x, 1.0)
            thr = predict_clh(TRUTH, s.workload).throughput
            thr *= 1 + rng.uniform(-noise, noise)
            out.append(MeasurementRecord(s, ops=round(thr * 1000), elapsed_s=1000.0))
    return out


def test_alpha_round_trip_on_fake():
    assert calibrate_alpha(4, 1000, 5, FAKE) == pytest.approx(3.5e5, rel=0.01)


class Counting:
    def __init__(self, ops, elapsed):
        self.result = (ops, elapsed)

    def run_parallel(self, n, p, duration_s):
        return self.result


def test_alpha_formula_n1_p1():
    assert calibrate_alpha(1, 1, 3, Counting(1200, 3.0)) == 400.0


def test_alpha_zero_ops_is_error():
    with pytest.raises(CalibrationError):
        calibrate_alpha(1, 10, 1, Counting(0, 1.0))


def test_costs_from_model_data():
    recs = synthetic([100, 500, 1000], [1, 2, 5]) + synthetic([100], [150])
    fit = calibrate_costs(recs, 3.5e5)
    assert fit.machine.w == pytest.approx(40, rel=0.10)
    assert fit.machine.r_i == pytest.approx(80, rel=0.10)
    assert fit.unsaturated_points >= 1
    assert fit.residual < 1e-3


@pytest.mark.parametrize("seed", range(5))
def test_costs_noisy_sum(seed):
    recs = synthetic([100, 500, 1000], [1, 2, 5, 50, 150], noise=0.05, seed=seed)
    fit = calibrate_costs(recs, 3.5e5)
    assert fit.machine.w + fit.machine.r_i == pytest.approx(120, rel=0.10)


def test_costs_single_c_not_identifiable():
    with pytest.raises(IdentifiabilityError, match="two or more distinct C"):
        calibrate_costs(synthetic([100], [1, 2, 3]), 3.5e5)


def test_costs_no_unsaturated_not_identifiable():
    with pytest.raises(IdentifiabilityError, match="unsaturated"):
        calibrate_costs(synthetic([100, 500], [1, 2]), 3.5e5)


def test_costs_empty():
    with pytest.raises(IdentifiabilityError):
        calibrate_costs([], 1.0)


def test_fit_machine_on_fake():
    fit, records = harness.fit_machine(
        FAKE, n=4, cs=[100, 500, 1000], xs=[1, 2, 5, 20, 50, 150], duration_s=5
    )
    assert fit.machine.alpha == pytest.approx(3.5e5, rel=0.01)
    assert fit.machine.w == pytest.approx(40, rel=0.10)
    assert fit.machine.r_i == pytest.approx(80, rel=0.10)
    assert len(records) == 18


def test_fake_single_thread_cycle():
    rec = FAKE.run_bench(BenchSetting("clh", 1, 100, 1, 2))
    # uncontended cycle: swap, read, critical, release, set-true, parallel
    assert rec.throughput == pytest.approx(3.5e5 / (40 + 80 + 100 + 40 + 40 + 100), rel=0.01)
    assert rec.per_thread == (rec.ops,)


def test_fake_single_thread_stated_band():
    rec = FAKE.run_bench(BenchSetting("clh", 1, 100, 1, 2))
    assert rec.throughput == pytest.approx(3.5e5 / (40 + 80 + 100 + 2 * 40 + 40 + 100), rel=0.10)


def test_fake_fairness():
    rec = FAKE.run_bench(BenchSetting("clh", 4, 100, 1, 2))
    assert rec.ops > 0
    assert max(rec.per_thread) <= 3 * min(rec.per_thread)


def test_fake_rejects_spinlock():
    with pytest.raises(ValueError):
        FAKE.run_bench(BenchSetting("spin", 2, 100, 1, 2))


@pytest.mark.parametrize("kwargs", [dict(duration_s=0), dict(duration_s=0.5), dict(x=-1),
                                    dict(lock="mcs"), dict(n=0)])
def test_setting_rejects(kwargs):
    base = dict(lock="clh", n=2, c=100, x=1, duration_s=2)
    base.update(kwargs)
    with pytest.raises(ValueError):
        BenchSetting(**base)


def test_record_validation():
    s = BenchSetting("clh", 2, 10, 1, 1)
    with pytest.raises(ValueError):
        MeasurementRecord(s, 10, 1.0, per_thread=(3, 3))
    with pytest.raises(ValueError):
        MeasurementRecord(s, 10, 0.0)
    assert MeasurementRecord(s, 10, 2.0, (5, 5)).throughput == 5.0


def test_parse_cpu_list():
    assert harness.parse_cpu_list("0,2,4-7") == [0, 2, 4, 5, 6, 7]
    assert harness.parse_cpu_list("3, 1") == [3, 1]
    with pytest.raises(ValueError):
        harness.parse_cpu_list("1,1")


def test_cpu_env_override(monkeypatch):
    monkeypatch.setenv(harness.CPU_LIST_ENV, "5,3")
    assert harness.cpu_fill_order() == [5, 3]
    monkeypatch.delenv(harness.CPU_LIST_ENV)
    order = harness.cpu_fill_order()
    assert sorted(order) == sorted(os.sched_getaffinity(0))


def test_pinning_error_when_oversubscribed():
    hw = HardwareMachine(warmup_s=0.0, cpus=[0])
    with pytest.raises(PinningError):
        hw.run_bench(BenchSetting("clh", 2, 100, 1, 1))


def test_pinning_error_for_foreign_cpu():
    hw = HardwareMachine(warmup_s=0.0, cpus=[4096])
    with pytest.raises(PinningError, match="could not pin"):
        hw.run_bench(BenchSetting("clh", 1, 100, 1, 1))


@pytest.mark.hardware
def test_hardware_single_thread_bench():
    cpu = sorted(os.sched_getaffinity(0))[0]
    hw = HardwareMachine(warmup_s=0.1, cpus=[cpu])
    rec = hw.run_bench(BenchSetting("clh", 1, 100, 1, 1))
    assert rec.ops > 0
    assert rec.cpus == (cpu,)
    assert rec.elapsed_s == pytest.approx(1.0, abs=0.2)


@pytest.mark.hardware
@pytest.mark.skipif(len(os.sched_getaffinity(0)) < 2, reason="needs two hardware threads")
def test_hardware_fairness():
    rec = HardwareMachine(warmup_s=0.2).run_bench(BenchSetting("clh", 2, 100, 1, 2))
    assert rec.ops > 0
    assert max(rec.per_thread) <= 3 * min(rec.per_thread)
