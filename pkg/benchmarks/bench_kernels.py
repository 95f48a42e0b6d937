"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Each workload runs once to warm the JIT cache, then ``--repeat`` times per
path.  The best wall time is reported along with the largest difference
between the two paths' outputs.
"""

import argparse
import os
import time

import numpy as np

from nldecay._accel import ENV_FLAG
from nldecay.funcspace import monomial, power_law
from nldecay.odesolve import SolverConfig, solve_surrogate
from nldecay.pde import Grid1D, PDEScenario, profile_shape, simulate


def surrogate_workload():
    cfg = SolverConfig(dt=0.01, t_end=1e4, record_every=100)  # 1e6 steps
    return solve_surrogate(power_law(1, 0.5), monomial(1, 3), power_law(1, 2), 1.0, cfg).values


def heat_workload():
    grid = Grid1D(100)
    sc = PDEScenario(power_law(1, 0.5), np.sin(grid.x), amplitude=power_law(0.5, 2),
                     profile=profile_shape("sin", grid), nonlinearity="cubic")
    return simulate(sc, grid, SolverConfig(dt=0.01, t_end=1e3, record_every=100)).norm.values


WORKLOADS = {"surrogate rk4, 1e6 steps": surrogate_workload, "imex heat, n=100, 1e5 steps": heat_workload}


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    saved = os.environ.get(ENV_FLAG)
    print(f"{'workload':<30} {'jit [s]':>9} {'numpy [s]':>10} {'speedup':>8} {'max diff':>10}")
    try:
        for name, fn in WORKLOADS.items():
            os.environ[ENV_FLAG] = "0"
            fn()
            t_jit, out_jit = best_time(fn, args.repeat)
            os.environ[ENV_FLAG] = "1"
            t_np, out_np = best_time(fn, args.repeat)
            diff = float(np.max(np.abs(out_jit - out_np)))
            print(f"{name:<30} {t_jit:>9.3f} {t_np:>10.3f} {t_np / t_jit:>7.1f}x {diff:>10.1e}")
    finally:
        if saved is None:
            os.environ.pop(ENV_FLAG, None)
        else:
            os.environ[ENV_FLAG] = saved


if __name__ == "__main__":
    main()
