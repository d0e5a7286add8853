"""Discrete probability measures on R^d and 1-D quantile machinery.

Houses the weighted atom lists everything else operates on, their
left-continuous quantile functions, exact one-dimensional Wasserstein
distances (merged-breakpoint integration of |F1^{-1} - F2^{-1}|^rho),
convex-order checks (quantile characterization in 1-D, martingale-coupling
feasibility LP in general dimension), Baker discretization, sampling of the
named experiment distributions, and the CSV interchange format.
"""

from __future__ import annotations

import numpy as np

from .normal import norm_pdf, norm_quantile

__all__ = [
    "DiscreteMeasure",
    "QuantileFn",
    "quantile",
    "w_rho_1d",
    "w2_vs_gaussian",
    "leq_cx_1d",
    "leq_cx_lp",
    "baker_discretize",
    "sample",
    "center_to_mean",
    "CX_TOL",
]

# Declared numeric band for convex-order decisions (the theory is exact,
# floating point is not); scaled by max(1, first absolute moments).
CX_TOL = 1e-10

# |sum(weights) - 1| beyond this is a user error, below it is rounding.
_WEIGHT_HARD_TOL = 1e-6


class DiscreteMeasure:
    """Finitely supported probability measure sum_i w_i * delta_{x_i}.

    Invariants enforced at construction: weights strictly positive
    (zero-weight atoms dropped) and renormalized to sum exactly to 1;
    exact duplicate atoms merged with weights added; atoms sorted
    (increasing in 1-D, lexicographically for d >= 2). Instances are
    immutable: the backing arrays are marked read-only.
    """

    __slots__ = ("atoms", "weights", "dim", "sorted_1d")

    def __init__(self, atoms, weights=None):
        atoms = np.array(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2 or atoms.shape[0] == 0:
            raise ValueError("atoms must be a non-empty (n,) or (n, d) array")
        n, d = atoms.shape
        if weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.array(weights, dtype=float).ravel()
            if weights.shape[0] != n:
                raise ValueError("weights length does not match atom count")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError("atoms and weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > _WEIGHT_HARD_TOL:
            raise ValueError(f"weights sum to {total:.9g}; not a probability vector")
        weights = weights / total

        keep = weights > 0
        atoms, weights = atoms[keep], weights[keep]
        if atoms.shape[0] == 0:
            raise ValueError("measure carries no mass")

        order = np.lexsort(atoms.T[::-1])
        atoms, weights = atoms[order], weights[order]
        dup = np.all(atoms[1:] == atoms[:-1], axis=1)
        if dup.any():
            starts = np.flatnonzero(np.concatenate(([True], ~dup)))
            weights = np.add.reduceat(weights, starts)
            atoms = atoms[starts]
        weights = weights / weights.sum()

        atoms.setflags(write=False)
        weights.setflags(write=False)
        self.atoms = atoms
        self.weights = weights
        self.dim = d
        self.sorted_1d = d == 1

    # -- basic queries ----------------------------------------------------

    @property
    def n(self):
        return self.atoms.shape[0]

    @property
    def x(self):
        """Atom positions as a flat vector (1-D measures only)."""
        self._require_1d()
        return self.atoms[:, 0]

    def mean(self):
        return self.weights @ self.atoms

    def abs_moment(self):
        """First absolute moment E|X| (coordinate-wise sum for d >= 2)."""
        return float(self.weights @ np.abs(self.atoms).sum(axis=1))

    def _require_1d(self):
        if self.dim != 1:
            raise ValueError("operation requires a one-dimensional measure")

    def quantile(self):
        self._require_1d()
        cum = np.concatenate(([0.0], np.cumsum(self.weights)))
        cum[-1] = 1.0
        return QuantileFn(cum, self.x)

    def cdf(self, v):
        """F(v) = mass of atoms <= v (1-D)."""
        self._require_1d()
        cum = np.concatenate(([0.0], np.cumsum(self.weights)))
        cum[-1] = 1.0
        idx = np.searchsorted(self.x, np.asarray(v, dtype=float), side="right")
        return cum[idx]

    def __repr__(self):
        return f"DiscreteMeasure(n={self.n}, dim={self.dim})"

    # -- CSV interchange ---------------------------------------------------
    # Header `w,x1,...,xd`; the weight column may be absent (uniform weights).

    @classmethod
    def from_csv(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
        if not header:
            raise ValueError(f"{path}: empty measure file")
        names = [s.strip() for s in header.split(",")]
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=float)
        if names[0] == "w":
            if data.shape[1] != len(names):
                raise ValueError(f"{path}: row width does not match header")
            return cls(data[:, 1:], data[:, 0])
        if names[0] == "x1":
            return cls(data)
        raise ValueError(f"{path}: header must start with 'w' or 'x1'")

    def to_csv(self, path):
        names = "w," + ",".join(f"x{k + 1}" for k in range(self.dim))
        body = np.column_stack([self.weights, self.atoms])
        np.savetxt(path, body, delimiter=",", header=names, comments="", fmt="%.17g")


class QuantileFn:
    """Left-continuous non-decreasing step function on (0, 1].

    Value values[k] on the cell (breakpoints[k], breakpoints[k+1]];
    breakpoints run 0 = P_0 < P_1 < ... < P_K = 1. Supports exact
    integration through the cached antiderivative at breakpoints.
    """

    __slots__ = ("breakpoints", "values", "_cumint")

    def __init__(self, breakpoints, values):
        breakpoints = np.asarray(breakpoints, dtype=float)
        values = np.asarray(values, dtype=float)
        if breakpoints.ndim != 1 or values.ndim != 1:
            raise ValueError("breakpoints and values must be 1-D")
        if breakpoints.shape[0] != values.shape[0] + 1:
            raise ValueError("need exactly one more breakpoint than values")
        if breakpoints[0] != 0.0 or breakpoints[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(breakpoints) <= 0):
            raise ValueError("breakpoints must strictly increase")
        if np.any(np.diff(values) < 0):
            raise ValueError("quantile values must be non-decreasing")
        self.breakpoints = breakpoints
        self.values = values
        self._cumint = np.concatenate(
            ([0.0], np.cumsum(values * np.diff(breakpoints)))
        )

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p > 1.0):
            raise ValueError("quantile argument must lie in (0, 1]")
        idx = np.searchsorted(self.breakpoints, p, side="left") - 1
        return self.values[np.clip(idx, 0, self.values.shape[0] - 1)]

    def antiderivative(self, p):
        """∫_0^p quantile, exact (piecewise linear in p)."""
        p = np.asarray(p, dtype=float)
        idx = np.clip(
            np.searchsorted(self.breakpoints, p, side="left") - 1,
            0,
            self.values.shape[0] - 1,
        )
        return self._cumint[idx] + self.values[idx] * (p - self.breakpoints[idx])

    def integrate(self, a, b):
        return self.antiderivative(b) - self.antiderivative(a)

    def mean(self):
        return self._cumint[-1]


def quantile(m: DiscreteMeasure) -> QuantileFn:
    """Left-continuous generalized inverse CDF of a 1-D measure."""
    return m.quantile()


def _merged_grid(q1: QuantileFn, q2: QuantileFn):
    grid = np.union1d(q1.breakpoints, q2.breakpoints)
    mids = 0.5 * (grid[:-1] + grid[1:])
    return grid, mids


def w_rho_1d(m1: DiscreteMeasure, m2: DiscreteMeasure, rho: float) -> float:
    """Exact 1-D Wasserstein distance W_rho via quantile integration.

    W_rho^rho = ∫_0^1 |F1^{-1}(p) - F2^{-1}(p)|^rho dp, evaluated by
    summing over the merged breakpoint grid where both quantiles are
    constant on every cell.
    """
    if rho < 1:
        raise ValueError("rho must be >= 1")
    q1, q2 = m1.quantile(), m2.quantile()
    grid, mids = _merged_grid(q1, q2)
    gaps = np.abs(q1(mids) - q2(mids))
    return float(np.sum(np.diff(grid) * gaps**rho) ** (1.0 / rho))


def w2_vs_gaussian(m: DiscreteMeasure, sigma2: float) -> float:
    """W_2 between a discrete 1-D measure and N(0, sigma2), in closed form.

    With Z_i the atoms, P_i the cumulative weights and pdf the standard
    normal density,

        W_2^2 = sigma2 + sum_i p_i Z_i^2
                + 2*sigma * sum_i Z_i (pdf(N^{-1}(P_i)) - pdf(N^{-1}(P_{i-1})))

    which is the quantile-coupling integral evaluated exactly using
    ∫_a^b N^{-1} = pdf(N^{-1}(a)) - pdf(N^{-1}(b)).
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    q = m.quantile()
    z = q.values
    p = np.diff(q.breakpoints)
    pdf_at_edges = norm_pdf(norm_quantile(q.breakpoints))
    sigma = np.sqrt(sigma2)
    w2sq = (
        sigma2
        + np.sum(p * z * z)
        + 2.0 * sigma * np.sum(z * np.diff(pdf_at_edges))
    )
    return float(np.sqrt(max(w2sq, 0.0)))


def leq_cx_1d(m1: DiscreteMeasure, m2: DiscreteMeasure, tol: float = CX_TOL) -> bool:
    """Convex-order test m1 <=cx m2 in one dimension.

    Quantile characterization: equal means and, for every q,
    ∫_q^1 F1^{-1} <= ∫_q^1 F2^{-1}. Both sides are piecewise linear with
    kinks only at merged breakpoints, so checking the grid is exhaustive.
    """
    q1, q2 = m1.quantile(), m2.quantile()
    scale = max(1.0, m1.abs_moment(), m2.abs_moment())
    if abs(q1.mean() - q2.mean()) > tol * scale:
        return False
    grid = np.union1d(q1.breakpoints, q2.breakpoints)
    tail1 = q1.mean() - q1.antiderivative(grid)
    tail2 = q2.mean() - q2.antiderivative(grid)
    return bool(np.all(tail1 <= tail2 + tol * scale))


def leq_cx_lp(m1: DiscreteMeasure, m2: DiscreteMeasure, feas_tol: float = 1e-8) -> bool:
    """Convex-order test via Strassen: m1 <=cx m2 iff a martingale coupling
    exists, decided by feasibility of the linear system

        pi >= 0,  pi 1 = p,  pi^T 1 = q,  sum_j pi_ij y_j = p_i x_i.

    Solver failure raises; it is never conflated with infeasibility.
    """
    from . import lp  # deferred: lp depends on this module
    from .errors import SolverError

    if m1.dim != m2.dim:
        raise ValueError("measures must share the dimension")
    problem = lp.martingale_feasibility_problem(m1, m2)
    solution = lp.solve(problem, feas_tol=feas_tol)
    if solution.status == "optimal":
        return True
    if solution.status == "infeasible":
        return False
    raise SolverError(f"LP solver did not certify feasibility: {solution.status}")


def baker_discretize(q, I: int) -> DiscreteMeasure:
    """Baker's uniform I-atom discretization: atom i is the cell average
    I * ∫_{(i-1)/I}^{i/I} F^{-1}. Preserves the mean exactly and is
    monotone for the convex order under refinement.

    `q` may be a QuantileFn or any object exposing integrate(a, b)
    (e.g. GaussianQuantile).
    """
    if I < 1:
        raise ValueError("I must be a positive integer")
    edges = np.linspace(0.0, 1.0, I + 1)
    atoms = np.array([I * q.integrate(edges[i], edges[i + 1]) for i in range(I)])
    return DiscreteMeasure(atoms)


def center_to_mean(m: DiscreteMeasure, target_mean) -> DiscreteMeasure:
    """Translate atoms so the weighted mean equals target_mean."""
    target = np.asarray(target_mean, dtype=float).reshape(-1)
    if target.shape[0] == 1 and m.dim > 1:
        target = np.full(m.dim, target[0])
    if target.shape[0] != m.dim:
        raise ValueError("target mean dimension mismatch")
    return DiscreteMeasure(m.atoms + (target - m.mean()), m.weights)


# -- named sampling families ----------------------------------------------

#: Default §-style covariance of the two-asset lognormal experiment.
LOGNORMAL_COV = np.array([[0.5, 0.1], [0.1, 0.1]])


def _sample_normal(rng, n, params):
    mean = float(params.get("mean", 0.0))
    sigma2 = float(params.get("sigma2", 1.0))
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return mean + np.sqrt(sigma2) * rng.standard_normal(n)


def _sample_uniform_box(rng, n, params):
    lo = np.atleast_1d(np.asarray(params.get("lo", -1.0), dtype=float))
    hi = np.atleast_1d(np.asarray(params.get("hi", 1.0), dtype=float))
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValueError("uniform-box needs lo < hi of equal shape")
    return rng.uniform(lo, hi, size=(n, lo.shape[0]))


def _lognormal_gaussians(rng, n, params):
    cov = np.asarray(params.get("cov", LOGNORMAL_COV), dtype=float)
    chol = np.linalg.cholesky(cov)
    return rng.standard_normal((n, cov.shape[0])) @ chol.T, np.diag(cov)


def _sample_lognormal2d_x(rng, n, params):
    g, var = _lognormal_gaussians(rng, n, params)
    return np.exp(g - 0.5 * var)


def _sample_lognormal2d_y(rng, n, params):
    # Terminal marginal: same Gaussian driver scaled by sqrt(2), variance
    # doubled, hence the full -var compensator keeps the unit mean.
    g, var = _lognormal_gaussians(rng, n, params)
    return np.exp(np.sqrt(2.0) * g - var)


_SAMPLERS = {
    "normal": _sample_normal,
    "uniform-box": _sample_uniform_box,
    "lognormal2d-x": _sample_lognormal2d_x,
    "lognormal2d-y": _sample_lognormal2d_y,
}


def sample(name: str, n: int, seed: int, **params) -> DiscreteMeasure:
    """Empirical measure (uniform weights) of n iid draws from a named
    distribution; deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    try:
        sampler = _SAMPLERS[name]
    except KeyError:
        raise ValueError(
            f"unknown distribution {name!r}; known: {sorted(_SAMPLERS)}"
        ) from None
    rng = np.random.default_rng(seed)
    return DiscreteMeasure(sampler(rng, int(n), params))
