"""Shared exception types.

Keeping them in one tiny module lets callers (and the CLI exit-code map)
distinguish "the problem has no solution" from "the solver gave up"
without importing solver modules.
"""


class ConvexOrderError(ValueError):
    """Raised when measures are not in convex order / a martingale
    coupling does not exist, where one is required."""


class SolverError(RuntimeError):
    """Numerical breakdown or a non-certified result where certification
    was demanded; never used to signal infeasibility."""
