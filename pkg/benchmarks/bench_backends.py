"""Compare the compiled and pure-Python backends.

    python3 benchmarks/bench_backends.py [--repeat 3] [--quick]

Times the simulator kernel over the oracle grid, one uncontended CLH
operation loop, and the contended counter stress, once per available backend.
"""
import argparse
import statistics
import time

from lockperf import _simpy, locks, sim
from lockperf.model import MachineParams, WorkloadParams

REF_MACHINE = MachineParams(alpha=3.5e5, w=40, r_i=80)


def timed(fn, repeat):
    samples = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def sim_grid(kernel, ns, xs):
    def go():
        for n in ns:
            for c in (100, 500):
                for x in xs:
                    wl = WorkloadParams.from_multiplier(n, c, x)
                    sim.simulate(sim.SimConfig(REF_MACHINE, wl), kernel=kernel)
    return go


def uncontended(mod, ops):
    lock = mod.ClhLock()
    handle = lock.register()
    return lambda: mod.run_operations(lock, 100, 100, ops, handle)


def stress(mod, ops):
    return lambda: locks.mutex_stress("clh", 4, ops, impl=mod)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()

    ns = (2, 10, 39) if args.quick else (2, 5, 10, 20, 39)
    xs = range(1, 142, 35 if args.quick else 10)
    ops = 2_000 if args.quick else 20_000

    cases = []
    for kernel in sim.available_kernels():
        cases.append((f"sim grid [{kernel}]", sim_grid(kernel, ns, xs)))
    for name in locks.available_backends():
        mod = locks.backend(name)
        cases.append((f"clh uncontended {ops} ops [{name}]", uncontended(mod, ops)))
        cases.append((f"clh 4-thread stress {ops} ops/thread [{name}]", stress(mod, ops)))

    results = {}
    width = max(len(label) for label, _ in cases)
    for label, fn in cases:
        results[label] = timed(fn, args.repeat)
        print(f"{label:<{width}}  {results[label] * 1e3:10.2f} ms")

    print()
    for label in results:
        if label.endswith("[compiled]"):
            other = label.replace("[compiled]", "[python]")
            if other in results:
                speedup = results[other] / results[label]
                print(f"speedup {label[: -len(' [compiled]')]}: {speedup:.1f}x")
    if len(sim.available_kernels()) == 1:
        print(f"(compiled kernels not built; only {_simpy.__name__} available)")


if __name__ == "__main__":
    main()
