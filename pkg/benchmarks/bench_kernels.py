"""Wall-clock comparison of the compiled and numpy kernels.

Usage: python benchmarks/bench_kernels.py [--eps 0.005] [--steps 2000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from stochhyst import _backend
from stochhyst.environment import ParameterTable, Seed, sample_environment
from stochhyst.solver import Loading, run_trajectory


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[1 / 100, 1 / 200, 1 / 800])
    ap.add_argument("--steps", type=int, default=2000, help="steps per period")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = [("python", _backend.python_kernels)]
    if _backend.compiled_kernels is not None:
        backends.insert(0, ("cython", _backend.compiled_kernels))
    loading = Loading.sin2(0.1)
    print(f"{'epsilon':>10} {'cells':>6} " + " ".join(f"{n:>10}" for n, _ in backends)
          + ("    speedup" if len(backends) == 2 else ""))
    for eps in args.eps:
        env = sample_environment(ParameterTable.standard(), eps, Seed(0))
        times = []
        results = []
        for _, k in backends:
            results.append(run_trajectory(env, loading, args.steps, backend=k))
            times.append(best_time(lambda: run_trajectory(env, loading, args.steps, backend=k),
                                   args.repeat))
        line = f"{eps:>10.5g} {env.n_cells:>6d} " + " ".join(f"{t:>9.3f}s" for t in times)
        if len(times) == 2:
            gap = np.max(np.abs(results[0].sigma_bar - results[1].sigma_bar))
            line += f" {times[1] / times[0]:>9.1f}x  (max |diff| {gap:.1e})"
        print(line)


if __name__ == "__main__":
    main()
