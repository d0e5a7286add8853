"""Optimal-transport plans between discrete weight vectors.

The solver is a primal network simplex on the transportation polytope.
Two interchangeable backends implement the pivoting: the Cython
extension `_transport_core` (used when it compiled at install time) and
the pure-Python `_transport_py`. `BACKEND` records which one is active;
`benchmarks/bench_transport.py` times them against each other.
"""

from __future__ import annotations

import numpy as np

from . import _transport_py
from .errors import SolverError

try:
    from . import _transport_core

    _CORE = _transport_core.solve_transport_core
    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    _CORE = None
    BACKEND = "python"

nw_corner = _transport_py.nw_corner


def solve_transport(p, q, cost, max_pivots=None):
    """Minimize <cost, X> over couplings of the weight vectors p and q.

    Parameters
    ----------
    p, q : array_like
        Nonnegative weights with equal sums (each summing to one in
        practice; only equality of the sums is required).
    cost : array_like, shape (len(p), len(q))
        Cost matrix.
    max_pivots : int, optional
        Pivot budget before giving up; defaults to a generous multiple
        of the basis size.

    Returns
    -------
    ndarray, shape (len(p), len(q))
        An optimal vertex of the transportation polytope (at most
        len(p) + len(q) - 1 nonzero entries).

    Raises
    ------
    SolverError
        If the pivot budget is exhausted, which indicates stalling
        rather than a property of the problem (the polytope is never
        empty and the objective never unbounded).
    """
    p = np.ascontiguousarray(p, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    cost = np.ascontiguousarray(cost, dtype=float)
    if p.ndim != 1 or q.ndim != 1:
        raise ValueError("weight vectors must be one-dimensional")
    if cost.shape != (p.shape[0], q.shape[0]):
        raise ValueError(
            f"cost shape {cost.shape} does not match weights "
            f"({p.shape[0]}, {q.shape[0]})"
        )
    if p.shape[0] == 0 or q.shape[0] == 0:
        raise ValueError("weight vectors must be nonempty")
    if np.any(p < 0.0) or np.any(q < 0.0):
        raise ValueError("weights must be nonnegative")
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix must be finite")
    gap = abs(float(p.sum()) - float(q.sum()))
    if gap > 1e-9 * max(1.0, float(p.sum())):
        raise ValueError(f"weight sums differ by {gap:.3e}")

    if max_pivots is None:
        # Degenerate instances (uniform marginals) burn pivots on
        # zero-flow cycles before Bland's rule bites; budget generously.
        max_pivots = max(5000, 5 * p.shape[0] * q.shape[0])
    if _CORE is not None:
        plan, status = _CORE(p, q, cost, int(max_pivots))
    else:
        plan, status = _transport_py.solve_transport_py(
            p, q, cost, int(max_pivots)
        )
    if status != _transport_py.OPTIMAL:
        raise SolverError(
            f"transportation simplex exceeded {max_pivots} pivots "
            f"({p.shape[0]}x{q.shape[0]} problem)"
        )
    return plan
