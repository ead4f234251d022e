"""Time the loess kernel on its numba and pure-numpy paths.

    python benchmarks/bench_kernels.py [--sizes 200,1000,5000] [--grid 100] [--repeat 5]

The numba path is compiled once before timing. Both paths are checked to
agree before anything is reported.
"""
import argparse
import math
import time

import numpy as np

from drmean import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="200,1000,5000")
    ap.add_argument("--grid", type=int, default=100)
    ap.add_argument("--degree", type=int, default=1, choices=(1, 2))
    ap.add_argument("--span", type=float, default=2 / 3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'n':>7} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8} {'max diff':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        x = rng.normal(size=n)
        y = np.sin(2 * x) + rng.normal(scale=0.3, size=n)
        grid = np.linspace(x.min(), x.max(), args.grid)
        q = math.ceil(args.span * n - 1e-9)
        a, _ = _kernels.loess_numba(x, y, grid, q, args.degree)  # compile / warm up
        b, _ = _kernels.loess_numpy(x, y, grid, q, args.degree)
        diff = float(np.max(np.abs(a - b)))
        t_nb = best_of(lambda: _kernels.loess_numba(x, y, grid, q, args.degree), args.repeat)
        t_np = best_of(lambda: _kernels.loess_numpy(x, y, grid, q, args.degree), args.repeat)
        print(f"{n:>7} {t_nb * 1e3:>10.2f} {t_np * 1e3:>10.2f} {t_np / t_nb:>8.1f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
