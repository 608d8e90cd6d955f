"""Compare the numba kernels with their numpy fallbacks.

    python benchmarks/bench_kernels.py [--sizes 1000 100000 1000000] [--repeat 5]

The first numba call compiles (or loads the on-disk cache); it is timed
separately and excluded from the steady-state numbers.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from diffeokit import kernels
from diffeokit._accel import HAVE_NUMBA
from diffeokit.simplicial import boundary_matrix, delta, product


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(size, rng):
    t = rng.uniform(-0.5, 1.5, size)
    theta = rng.uniform(-0.5, 1.5, size)
    return {
        "flat_bump": (lambda: kernels.flat_bump_numba(t), lambda: kernels.flat_bump_numpy(t)),
        "cutoff": (lambda: kernels.cutoff_numba(t, 0.2), lambda: kernels.cutoff_numpy(t, 0.2)),
        "circle_section": (lambda: kernels.section_numba(theta, 0.2),
                           lambda: kernels.section_numpy(theta, 0.2)),
    }


def smith_cases():
    """Boundary matrices of D2 x D2, the kind of input homology feeds the SNF."""
    p = product(delta(2), delta(2))
    out = {}
    for q in (1, 2, 3, 4):
        m = boundary_matrix(p, q)
        out[f"smith_diagonal[d{q} {m.shape[0]}x{m.shape[1]}]"] = (
            lambda m=m: kernels.smith_diagonal_numba(m),
            lambda m=m: kernels.smith_diagonal_numpy(m))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 100_000, 1_000_000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path exists")
        return 1
    rng = np.random.default_rng(args.seed)
    warm = dict(cases(16, rng), **smith_cases())
    for name, (nb, _) in warm.items():
        t0 = time.perf_counter()
        nb()
        print(f"first call {name:<30} {1e3 * (time.perf_counter() - t0):9.2f} ms")
    print(f"\n{'kernel':<30} {'size':>9} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for size in args.sizes:
        for name, (nb, npy) in cases(size, rng).items():
            a, b = best_of(nb, args.repeat), best_of(npy, args.repeat)
            print(f"{name:<30} {size:>9} {1e3 * a:10.3f} {1e3 * b:10.3f} {b / a:8.2f}x")
    for name, (nb, npy) in smith_cases().items():
        a, b = best_of(nb, args.repeat), best_of(npy, args.repeat)
        print(f"{name:<30} {'-':>9} {1e3 * a:10.3f} {1e3 * b:10.3f} {b / a:8.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
