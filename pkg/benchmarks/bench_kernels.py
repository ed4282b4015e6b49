"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Kernel timings call each backend directly. The end-to-end timing runs
resolving trajectories in a subprocess per backend, selected through
ASSORT_KNAP_BACKEND.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from assort_knap import kernels
from assort_knap.fluid import psi_rows
from assort_knap.harness import generate_instance

TRAJECTORY_SNIPPET = """
import time
import numpy as np
from assort_knap import kernels
from assort_knap.fluid import fluid_benchmark
from assort_knap.harness import generate_instance
from assort_knap.sim import run_trajectory
inst = generate_instance(10, 5, 3, 1024, np.random.default_rng(0))
phi = fluid_benchmark(inst)
t = time.perf_counter()
for seed in range({n}):
    run_trajectory(inst, "resolving", seed, fluid_value=phi, record_traces=False)
print(kernels.BACKEND, (time.perf_counter() - t) / {n})
"""


def kernel_cases(rng):
    inst = generate_instance(20, 10, 5, 1024, rng)
    A, b = psi_rows(inst, inst.gamma0, 3.0)
    c = inst.revenues * inst.preferences
    u = np.ones(len(c))
    x = rng.uniform(0.05, 1, 40)
    x = np.minimum(x * 5 / x.sum(), 0.999)
    x *= 5 / x.sum()
    v, Acons = inst.preferences.copy(), inst.consumption.copy()
    support = np.array([0, 3, 7], dtype=np.intp)
    uniforms = rng.random(1024)

    def simplex(mod):
        return lambda: mod.simplex(c, A, b, u, 1e-9, 1e-9, 10_000)

    def bvn(mod):
        return lambda: mod.reduced_bvn(x, 5, 1e-12)

    def epoch(mod):
        def run():
            inv = inst.initial_inventory.copy() * 100
            mod.run_epoch(support, v, Acons, inv, uniforms, 0, 1024, True, np.zeros(20, dtype=np.int64))
        return run

    return {"simplex (20 vars, 12 rows)": simplex, "reduced_bvn (N=40, K=5)": bvn,
            "run_epoch (one epoch)": epoch}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--trajectories", type=int, default=50)
    args = p.parse_args()
    backends = kernels.available_backends()
    print(f"backends available: {', '.join(backends)}")
    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'kernel':32s}" + "".join(f"{b:>14s}" for b in backends) + "     speedup")
    for name, make in cases.items():
        times = []
        for b in backends:
            fn = make(kernels.load_backend(b))
            number, _ = timeit.Timer(fn).autorange()
            times.append(min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number)
        speed = f"{times[-1] / times[0]:10.1f}x" if len(times) == 2 else ""
        print(f"{name:32s}" + "".join(f"{t * 1e6:12.1f}us" for t in times) + speed)
    print("resolving trajectory, N=10 M=5 K=3 T=1024 (seconds each):")
    for b in backends:
        env = dict(os.environ, ASSORT_KNAP_BACKEND=b)
        out = subprocess.run([sys.executable, "-c", TRAJECTORY_SNIPPET.format(n=args.trajectories)],
                             env=env, capture_output=True, text=True, check=True)
        print("  " + out.stdout.strip())


if __name__ == "__main__":
    main()
