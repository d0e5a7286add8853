#!/usr/bin/env python3
"""Time the two transportation-simplex backends against each other.

The package ships the same pivoting algorithm twice: a compiled
extension and a pure-Python fallback chosen at import time.  This script
runs random dense instances over a ladder of sizes, reports the best
wall time of each backend, and cross-checks that both return identical
objectives (the implementations are supposed to pivot identically, so
any drift is a bug, not noise).

Usage:  python3 benchmarks/bench_transport.py --sizes 20 40 80 160 --reps 3
"""

import argparse
import time

import numpy as np

from cxproj import _transport_py

try:
    from cxproj import _transport_core
except ImportError:
    _transport_core = None


def instance(rng, n_i, n_j):
    p = rng.random(n_i) + 0.1
    q = rng.random(n_j) + 0.1
    p /= p.sum()
    q /= q.sum()
    cost = rng.standard_normal((n_i, n_j))
    return p, q, cost


def best_time(fn, reps):
    best = float("inf")
    value = None
    for _ in range(reps):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[20, 40, 80, 160])
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'size':>6} {'python (s)':>12} {'compiled (s)':>13} {'speedup':>8}  agree")
    for size in args.sizes:
        p, q, cost = instance(rng, size, size)
        budget = max(5000, 5 * size * size)

        t_py, res_py = best_time(
            lambda: _transport_py.solve_transport_py(p, q, cost, budget), args.reps
        )
        obj_py = float(np.sum(res_py[0] * cost))

        if _transport_core is None:
            print(f"{size:>6} {t_py:>12.4f} {'n/a':>13} {'n/a':>8}  (extension not built)")
            continue

        t_c, res_c = best_time(
            lambda: _transport_core.solve_transport_core(p, q, cost, budget), args.reps
        )
        obj_c = float(np.sum(np.asarray(res_c[0]) * cost))
        agree = "yes" if abs(obj_py - obj_c) <= 1e-9 * (1 + abs(obj_py)) else "NO"
        print(f"{size:>6} {t_py:>12.4f} {t_c:>13.4f} {t_py / t_c:>8.1f}  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
