"""Piecewise-linear functions on [0, 1] and their convex/concave hulls.

The central object is f(q) = ∫_0^q (F_mu^{-1} - F_nu^{-1}) dp, continuous
and piecewise affine with nodes at the merged quantile breakpoints. Its
largest convex minorant psi (computed by Andrew's monotone chain on the
node list, which is exact for piecewise-linear input) drives every 1-D
projection formula; the concave hull is the mirror image by negation.
"""

from __future__ import annotations

import numpy as np

from .measures import QuantileFn

__all__ = [
    "PiecewiseLinear",
    "merge_breakpoints",
    "integrated_quantile_diff",
    "convex_hull",
    "concave_hull",
    "left_derivative",
]


class PiecewiseLinear:
    """Continuous piecewise-linear function on [0, 1] given by its nodes.

    nodes: strictly increasing, starting at 0 and ending at 1.
    values: f(node_k); linear interpolation in between.
    """

    __slots__ = ("nodes", "values")

    def __init__(self, nodes, values):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.shape[0] < 2:
            raise ValueError("need matching node/value arrays with >= 2 entries")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("nodes must span [0, 1]")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must strictly increase")
        self.nodes = nodes
        self.values = values

    def __call__(self, q):
        return np.interp(q, self.nodes, self.values)

    def slopes(self):
        """Per-segment slopes, one per node gap."""
        return np.diff(self.values) / np.diff(self.nodes)

    def left_derivative(self, q):
        return left_derivative(self, q)

    def negate(self):
        return PiecewiseLinear(self.nodes, -self.values)

    def __repr__(self):
        return f"PiecewiseLinear(K={self.nodes.shape[0] - 1} segments)"


def merge_breakpoints(b1, b2, tol: float = 1e-14):
    """Sorted union of two breakpoint grids; points of b2 within tol of a
    point of b1 snap onto it. Cumulative weights computed two ways land on
    the same cell boundary, so micro-cells (and garbage slopes across
    them) never arise."""
    b1 = np.asarray(b1, dtype=float)
    b2 = np.array(b2, dtype=float)
    idx = np.clip(np.searchsorted(b1, b2), 1, b1.shape[0] - 1)
    left, right = b1[idx - 1], b1[idx]
    b2 = np.where(np.abs(b2 - left) <= tol, left, b2)
    b2 = np.where(np.abs(b2 - right) <= tol, right, b2)
    return np.union1d(b1, b2)


def integrated_quantile_diff(qm: QuantileFn, qn: QuantileFn) -> PiecewiseLinear:
    """f(q) = ∫_0^q (qm - qn), exact on the union of both breakpoint sets."""
    grid = merge_breakpoints(qm.breakpoints, qn.breakpoints)
    values = qm.antiderivative(grid) - qn.antiderivative(grid)
    values[0] = 0.0
    return PiecewiseLinear(grid, values)


def _lower_hull_indices(x, y, tol):
    """Andrew's monotone chain, lower hull only (input already sorted in x).

    The cross-product turn test keeps strictly convex vertices; collinear
    middle points are dropped so the representation is canonical.
    """
    stack = [0]
    for k in range(1, x.shape[0]):
        while len(stack) >= 2:
            i, j = stack[-2], stack[-1]
            # cross > 0 <=> j lies strictly below the chord i -> k
            cross = (x[j] - x[i]) * (y[k] - y[i]) - (y[j] - y[i]) * (x[k] - x[i])
            if cross <= tol:
                stack.pop()
            else:
                break
        stack.append(k)
    return np.asarray(stack, dtype=np.intp)


def convex_hull(f: PiecewiseLinear) -> PiecewiseLinear:
    """Largest convex minorant of f; hull nodes are a subset of f's nodes.

    Valid because f is piecewise linear, so the minorant's vertices can
    only sit on input nodes; no function evaluation is needed.
    """
    scale = max(1.0, float(np.max(np.abs(f.values))))
    idx = _lower_hull_indices(f.nodes, f.values, 1e-14 * scale)
    return PiecewiseLinear(f.nodes[idx], f.values[idx])


def concave_hull(f: PiecewiseLinear) -> PiecewiseLinear:
    """Smallest concave majorant: -convex_hull(-f)."""
    return convex_hull(f.negate()).negate()


def left_derivative(f: PiecewiseLinear, q: float) -> float:
    """Slope of the segment immediately left of q (incoming slope at nodes)."""
    if q <= 0.0 or q > 1.0:
        raise ValueError("left derivative defined on (0, 1]")
    k = np.searchsorted(f.nodes, q, side="left")
    k = min(max(k, 1), f.nodes.shape[0] - 1)
    return float(
        (f.values[k] - f.values[k - 1]) / (f.nodes[k] - f.nodes[k - 1])
    )
