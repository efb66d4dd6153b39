"""Compare the numba kernels with their numpy twins.

Usage: python3 benchmarks/bench_kernels.py [--size N] [--repeat R] [--end-to-end]

Each kernel pair is called on the same inputs; the script reports the best
wall time of R runs for each backend, the speed-up and the maximum relative
difference between the two results.  With --end-to-end it also times a full
doubling check in two subprocesses, one with SASAKIAN_MCP_DISABLE_NUMBA=1.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from sasakian_mcp import kernels
from sasakian_mcp._accel import NUMBA_AVAILABLE


def best_time(fn, args, repeat):
    out = fn(*args)  # warm-up, includes JIT compilation on first use
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def rel_diff(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def cases(size, rng):
    x = rng.uniform(-30.0, 30.0, size)
    t = rng.uniform(0.0, 0.99, size)
    k1d2 = rng.uniform(-5.0, 30.0, size)
    k2d2 = rng.uniform(-5.0, 8.0, size)
    n = 2
    cov = np.column_stack([rng.uniform(-1, 1, (size // 8, 2 * n)),
                           rng.uniform(-6, 6, size // 8)])
    steps = np.full(size // 8, 1e-5)
    return [
        ("f1", kernels.f1_numpy, kernels.f1_numba, (x,)),
        ("f2", kernels.f2_numpy, kernels.f2_numba, (x,)),
        ("density (N=7)", kernels.density_numpy, kernels.density_numba, (k1d2, k2d2, t, 7)),
        ("heisenberg jacobians (n=2)", kernels.heisenberg_jacobians_numpy,
         kernels.heisenberg_jacobians_numba, (cov, steps)),
    ]


def end_to_end(samples):
    code = ("import time; from sasakian_mcp import spaces, verify, kernels; s = time.perf_counter(); "
            f"r = verify.doubling_check(spaces.ModelSpace('heisenberg', 1), 1.0, {samples}, seed=0); "
            "print(kernels.BACKEND, r.ratio, time.perf_counter() - s)")
    for flag in ("0", "1"):
        env = dict(os.environ, SASAKIAN_MCP_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                             capture_output=True, text=True).stdout.split()
        print(f"doubling check, {samples} samples, backend {out[0]:>5}: "
              f"{float(out[2]):7.2f} s, ratio {float(out[1]):.5f}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    ap.add_argument("--samples", type=int, default=1_000_000)
    args = ap.parse_args(argv)

    if not NUMBA_AVAILABLE:
        sys.exit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}{'max rel diff':>14}")
    for name, f_np, f_nb, fargs in cases(args.size, rng):
        t_np, out_np = best_time(f_np, fargs, args.repeat)
        t_nb, out_nb = best_time(f_nb, fargs, args.repeat)
        print(f"{name:<28}{1e3 * t_np:12.2f}{1e3 * t_nb:12.2f}{t_np / t_nb:10.1f}"
              f"{rel_diff(out_nb, out_np):14.2e}")
    if args.end_to_end:
        end_to_end(args.samples)


if __name__ == "__main__":
    main()
