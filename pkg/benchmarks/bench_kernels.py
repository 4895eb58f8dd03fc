"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 15 25 35] [--n-theta 1 2 3] [--repeat 3]

Each row reports the best-of-``repeat`` wall time per call for both backends,
the speedup, and whether the outputs agree bit for bit.
"""

import argparse
import sys
import timeit

import numpy as np

from twohessian import kernels
from twohessian.directions import generate_directions
from twohessian.grid import ScalarField, build_grid
from twohessian.monotone import MonotoneOperator


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def rows(sizes, thetas, repeat):
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        sys.exit("compiled extension not built; reinstall without TWOHESSIAN_NO_EXT")
    py = kernels.get_backend("python")
    rng = np.random.default_rng(0)
    for n in sizes:
        grid = build_grid(n)
        v = rng.normal(size=grid.shape)
        f = rng.uniform(0.5, 2.0, size=grid.shape)
        mask = grid.interior.view(np.uint8)
        for name, args in (("naive_s2", (v, mask, grid.h)), ("jacobi_sweep", (v, f, mask, grid.h))):
            tp = best_time(lambda: getattr(py, name)(*args), repeat)
            tc = best_time(lambda: getattr(cy, name)(*args), repeat)
            ok = same(getattr(py, name)(*args), getattr(cy, name)(*args))
            yield name, n, "-", tp, tc, ok
        for nt in thetas:
            if 2 * nt >= n - 1:
                continue
            g = build_grid(n, band_width=nt)
            u = ScalarField(g, rng.normal(size=g.shape))
            op = MonotoneOperator(g, generate_directions(nt))
            uflat = u.values.ravel()
            args = (uflat, op.nodes, op.offsets, op.inv_scale, op.triplets, op.ntrip_allowed)
            tp = best_time(lambda: py.monotone_eval(*args), repeat)
            tc = best_time(lambda: cy.monotone_eval(*args), repeat)
            ok = same(py.monotone_eval(*args), cy.monotone_eval(*args))
            yield "monotone_eval", n, nt, tp, tc, ok


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[15, 25, 35])
    ap.add_argument("--n-theta", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'kernel':<14} {'N':>3} {'nt':>2} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}  identical")
    all_ok = True
    for name, n, nt, tp, tc, ok in rows(args.sizes, args.n_theta, args.repeat):
        all_ok &= ok
        print(f"{name:<14} {n:>3} {nt!s:>2} {tp:>11.4f} {tc:>11.4f} {tp / tc:>8.1f}  {ok}")
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
