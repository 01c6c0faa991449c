"""Benchmark the lattice-row assembly kernel: compiled vs pure numpy.

Run with:

    python benchmarks/bench_kernels.py [n_points] [n_poles]

The compiled backend is controlled by the GIANTATOM_NUMBA environment
variable; this script times both implementations directly regardless of
the flag and verifies they agree.
"""

import sys
import time

import numpy as np

from giantatom.numerics import _kernels
from giantatom.numerics._kernels import _lattice_rows_numpy


def make_inputs(n, m, seed=0):
    rng = np.random.default_rng(seed)
    nodes = np.linspace(-40.0, 40.0, n)
    weights = np.full(n, nodes[1] - nodes[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5
    s = 5
    jstar = np.sort(rng.integers(s, n - s, size=m)).astype(np.int64)
    j0 = (jstar - s // 2).astype(np.int64)
    d1 = rng.standard_normal((m, s))
    log_plus = (rng.standard_normal(m)
                + 1j * rng.standard_normal(m)).astype(np.complex128)
    return nodes, weights, jstar, j0, d1, log_plus


def bench(fn, args, repeats=7):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 6401
    m = int(sys.argv[2]) if len(sys.argv) > 2 else n
    args = make_inputs(n, m)

    t_np, ref = bench(_lattice_rows_numpy, args)
    print(f"numpy : n={n} m={m}  {t_np * 1e3:8.2f} ms")

    if not _kernels.USE_NUMBA:
        print("numba : unavailable (GIANTATOM_NUMBA=0 or not installed)")
        return

    jit_args = (np.ascontiguousarray(args[0]), np.ascontiguousarray(args[1]),
                args[2], args[3], np.ascontiguousarray(args[4]), args[5])
    _kernels._lattice_rows_jit(*jit_args)  # warm-up / compile
    t_jit, out = bench(_kernels._lattice_rows_jit, jit_args)
    err = float(np.abs(out - ref).max())
    print(f"numba : n={n} m={m}  {t_jit * 1e3:8.2f} ms  "
          f"(x{t_np / t_jit:.1f} vs numpy, max|diff|={err:.2e})")


if __name__ == "__main__":
    main()
