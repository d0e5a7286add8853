"""Dense two-phase revised simplex for small equality-form LPs.

    minimize c'x   subject to   A x = b,  x >= 0.

Written for the problem sizes this package actually produces (martingale
feasibility systems, exact MOT instances capped at I*J <= 20000 variables,
self-test transportation problems): dense algebra, explicit basis inverse
with rank-one updates and periodic refactorization, Dantzig pricing with a
Bland fallback once pivots degenerate. Optimal-transport plans, the one
genuinely hot path, go through the specialized transportation simplex in
`transport` instead; `ot_plan` below wires that up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .coupling import Coupling
from .errors import SolverError
from .measures import DiscreteMeasure

__all__ = [
    "LpProblem",
    "LpSolution",
    "solve",
    "ot_plan",
    "martingale_feasibility_problem",
]

_DEGENERATE_PIVOTS_BEFORE_BLAND = 50
_REFACTOR_EVERY = 60
# Ratio-test floor. Entries of B_inv @ A_j below this are treated as zero:
# with equilibrated rows the honest pivots of these problems sit far above,
# while accumulated rank-one-update noise sits below (observed ~1e-10..1e-7
# on degenerate martingale instances; pivoting on such an entry makes the
# basis numerically singular).
_PIVOT_FLOOR = 1e-8


class _SingularBasis(Exception):
    """Internal: refactorization met a numerically singular basis."""


@dataclass
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.c = np.asarray(self.c, dtype=float).ravel()
        m, n = self.A.shape
        if self.b.shape[0] != m or self.c.shape[0] != n or n == 0 or m == 0:
            raise ValueError("inconsistent LP dimensions")
        if not (
            np.all(np.isfinite(self.A))
            and np.all(np.isfinite(self.b))
            and np.all(np.isfinite(self.c))
        ):
            raise ValueError("LP data must be finite")


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | breakdown
    x: np.ndarray | None
    objective: float | None
    duals: np.ndarray | None
    max_residual: float
    iterations: int
    message: str = ""


class _Simplex:
    """One single-use solver run; see module docstring for the design."""

    def __init__(
        self,
        problem: LpProblem,
        feas_tol: float,
        max_iter: int | None,
        careful: bool = False,
    ):
        # Row equilibration improves pivot-tolerance behaviour; remember the
        # scaling (and sign flips making b >= 0) to restore duals later.
        A = problem.A.copy()
        b = problem.b.copy()
        scale = np.maximum(np.max(np.abs(A), axis=1), np.abs(b))
        scale[scale == 0.0] = 1.0
        A /= scale[:, None]
        b /= scale
        flip = b < 0.0
        A[flip] *= -1.0
        b[flip] *= -1.0

        self._set_matrix(A)
        self.b = b
        self.c = problem.c
        self.row_scale = scale
        self.row_flip = flip
        self.feas_tol = feas_tol
        self.max_iter = (
            max_iter if max_iter is not None else 10 * (self.m + self.n) ** 2
        )
        self.kept_rows = np.arange(self.m)

        self.iterations = 0
        # Careful mode is the recovery configuration used after a singular
        # refactorization: Bland pivoting throughout and tight refactoring.
        self.careful = careful
        self.bland = careful
        self.refactor_every = 20 if careful else _REFACTOR_EVERY
        self.degenerate_streak = 0

    # -- basis bookkeeping --------------------------------------------------

    def _set_matrix(self, A: np.ndarray):
        """Install the (equilibrated) constraint matrix.

        Pricing sweeps the whole matrix once per iteration; the martingale
        systems are a few nonzeros per column, so for large sparse matrices
        keep a compressed copy of the transpose alongside the dense one.
        """
        self.A = A
        self.m, self.n = A.shape
        nnz = np.count_nonzero(A)
        if A.size >= 200_000 and nnz <= 0.25 * A.size:
            self.A_T = sparse.csr_matrix(A.T)
        else:
            self.A_T = None

    def _price(self, y: np.ndarray) -> np.ndarray:
        """Row vector times constraint matrix, y @ A."""
        if self.A_T is not None:
            return self.A_T @ y
        return y @ self.A

    def _refactor(self):
        cols = np.zeros((self.m, self.m))
        for k, j in enumerate(self.basis):
            if j < self.n:
                cols[:, k] = self.A[:, j]
            else:
                cols[j - self.n, k] = 1.0
        try:
            B_inv = np.linalg.inv(cols)
        except np.linalg.LinAlgError as exc:
            raise _SingularBasis from exc
        # inv() "succeeds" on nearly singular input; verify the product.
        err = float(np.max(np.abs(B_inv @ cols - np.eye(self.m))))
        if not np.isfinite(err) or err > 1e-6:
            raise _SingularBasis
        self.B_inv = B_inv
        self.x_B = self.B_inv @ self.b

    def _pivot(self, enter_col: np.ndarray, j: int, row: int, theta: float):
        d = enter_col
        piv = d[row]
        self.x_B -= theta * d
        self.x_B[row] = theta
        eta = d / piv
        eta[row] = 1.0 - 1.0 / piv
        self.B_inv -= np.outer(eta, self.B_inv[row])
        self.basis[row] = j
        self.iterations += 1
        if self.iterations % self.refactor_every == 0:
            self._refactor()
        if theta <= 1e-11:
            self.degenerate_streak += 1
            if self.degenerate_streak > _DEGENERATE_PIVOTS_BEFORE_BLAND:
                self.bland = True
        else:
            # A nondegenerate step strictly lowers the objective, so any
            # cycle is broken and Dantzig pricing can resume.
            self.degenerate_streak = 0
            self.bland = self.careful

    def _choose_entering(self, reduced: np.ndarray, eligible: np.ndarray, tol: float):
        candidates = np.flatnonzero(eligible & (reduced < -tol))
        if candidates.size == 0:
            return -1
        if self.bland:
            return int(candidates[0])
        return int(candidates[np.argmin(reduced[candidates])])

    def _ratio_test(self, d: np.ndarray, prefer_artificial: bool):
        pos = d > _PIVOT_FLOOR
        if not np.any(pos):
            return -1, 0.0
        idx = np.flatnonzero(pos)
        ratios = self.x_B[idx] / d[idx]
        theta = np.min(ratios)
        ties = idx[ratios <= theta + 1e-12]
        if prefer_artificial:
            art = ties[self.basis[ties] >= self.n]
            if art.size:
                ties = art
        if self.bland:
            # Bland needs the smallest basis-variable index among the ties.
            row = int(ties[np.argmin(self.basis[ties])])
        else:
            # Otherwise the tie-break is free: the largest pivot element
            # keeps the updated basis inverse as clean as possible.
            row = int(ties[np.argmax(d[ties])])
        return row, float(max(self.x_B[row] / d[row], 0.0))

    # -- the two phases -----------------------------------------------------

    def _run_phase(self, cost: np.ndarray, art_cost: bool):
        """Iterate until optimal for the given cost vector.

        Returns 'optimal' / 'unbounded' / 'breakdown'. Cost of artificial
        variables is 1 in phase one (art_cost) and they are never allowed
        to re-enter the basis.
        """
        tol = 1e-9 * (1.0 + float(np.max(np.abs(cost))))
        while True:
            if self.iterations >= self.max_iter:
                return "breakdown"
            c_B = np.where(
                self.basis < self.n,
                cost[np.minimum(self.basis, self.n - 1)],
                1.0 if art_cost else 0.0,
            )
            y = c_B @ self.B_inv
            reduced = cost - self._price(y)
            eligible = np.ones(self.n, dtype=bool)
            eligible[self.basis[self.basis < self.n]] = False
            j = self._choose_entering(reduced, eligible, tol)
            if j < 0:
                self.duals_scaled = y
                return "optimal"
            d = self.B_inv @ self.A[:, j]
            row, theta = self._ratio_test(d, prefer_artificial=art_cost)
            if row < 0:
                return "unbounded" if not art_cost else "breakdown"
            self._pivot(d, j, row, theta)

    def _drop_redundant_rows(self):
        """After phase one, pivot zero-level artificials out of the basis.

        If the artificial in basis slot r cannot be driven out (its tableau
        row vanishes on all original columns), the constraint system is
        rank-deficient and the artificial's own row t is deleted: the
        dependency vector w = B_inv[r] has w_t = 1 there, and the remaining
        basis columns stay independent on the reduced row set.
        """
        while True:
            art_slots = np.flatnonzero(self.basis >= self.n)
            if art_slots.size == 0:
                return
            r = int(art_slots[0])
            tableau_row = self._price(self.B_inv[r])
            tableau_row[self.basis[self.basis < self.n]] = 0.0
            j = int(np.argmax(np.abs(tableau_row)))
            if abs(tableau_row[j]) > 1e-9:
                d = self.B_inv @ self.A[:, j]
                self._pivot(d, j, r, 0.0)
                continue
            t = int(self.basis[r] - self.n)  # current row of this artificial
            keep = np.ones(self.m, dtype=bool)
            keep[t] = False
            m_before = self.m
            self._set_matrix(self.A[keep])
            self.b = self.b[keep]
            self.kept_rows = self.kept_rows[keep]
            slot_keep = np.ones(m_before, dtype=bool)
            slot_keep[r] = False
            basis = self.basis[slot_keep]
            # Artificial indices denote unit columns in *current* row
            # numbering: those above the deleted row shift down by one.
            art = basis >= self.n
            basis[art & (basis - self.n > t)] -= 1
            self.basis = basis
            self._refactor()

    def run(self) -> LpSolution:
        self.basis = np.arange(self.n, self.n + self.m)
        self.B_inv = np.eye(self.m)
        self.x_B = self.b.copy()

        status = self._run_phase(np.zeros(self.n), art_cost=True)
        if status != "optimal":
            return self._finish(status)
        art_level = float(
            np.sum(self.x_B[self.basis >= self.n].clip(min=0.0))
        )
        if art_level > self.feas_tol * (1.0 + float(np.max(np.abs(self.b)))):
            return self._finish("infeasible")
        self.bland = self.careful
        self.degenerate_streak = 0
        self._drop_redundant_rows()
        status = self._run_phase(self.c, art_cost=False)
        return self._finish(status)

    def _finish(self, status: str) -> LpSolution:
        if status != "optimal":
            return LpSolution(
                status=status,
                x=None,
                objective=None,
                duals=None,
                max_residual=np.inf,
                iterations=self.iterations,
                message=f"simplex stopped with status {status}",
            )
        x = np.zeros(self.n)
        real = self.basis < self.n
        x[self.basis[real]] = self.x_B[real].clip(min=0.0)
        duals = np.zeros(self.row_flip.shape[0])
        y = self.duals_scaled / self.row_scale[self.kept_rows]
        y = np.where(self.row_flip[self.kept_rows], -y, y)
        duals[self.kept_rows] = y
        return LpSolution(
            status="optimal",
            x=x,
            objective=float(self.c @ x),
            duals=duals,
            max_residual=0.0,  # caller recomputes against the original system
            iterations=self.iterations,
        )


def solve(problem: LpProblem, feas_tol: float = 1e-9, max_iter: int | None = None) -> LpSolution:
    """Solve min c'x s.t. Ax = b, x >= 0; see LpSolution.status.

    Deterministic: identical inputs produce the identical pivot sequence.
    """
    try:
        sol = _Simplex(problem, feas_tol, max_iter).run()
    except _SingularBasis:
        # A noise-level pivot slipped through the floor and wrecked the
        # basis. Rare enough that redoing the whole solve in the
        # slow-but-steady configuration is the simplest sound recovery.
        try:
            sol = _Simplex(problem, feas_tol, max_iter, careful=True).run()
        except _SingularBasis as exc:
            raise SolverError("singular basis during refactorization") from exc
    if sol.status == "optimal":
        sol.max_residual = float(np.max(np.abs(problem.A @ sol.x - problem.b)))
    return sol


def martingale_feasibility_problem(m1: DiscreteMeasure, m2: DiscreteMeasure) -> LpProblem:
    """Feasibility system of a martingale coupling of (m1, m2):
    pi >= 0, row sums p, column sums q, sum_j pi_ij (y_j - x_i) = 0."""
    A, b = martingale_constraints(m1, m2)
    return LpProblem(c=np.zeros(m1.n * m2.n), A=A, b=b)


def martingale_constraints(m1: DiscreteMeasure, m2: DiscreteMeasure):
    """Constraint matrix/rhs shared by feasibility and exact MOT solves.

    Variable layout: pi flattened row-major, column i*J + j. The martingale
    block uses the centered coefficients (y_j - x_i), equivalent to
    sum_j pi_ij y_j = p_i x_i given the row-sum block, but better scaled.
    """
    if m1.dim != m2.dim:
        raise ValueError("measures must share the dimension")
    I, J, d = m1.n, m2.n, m1.dim
    X, Y = m1.atoms, m2.atoms
    nvar = I * J
    A = np.zeros((I + J + I * d, nvar))
    for i in range(I):
        A[i, i * J : (i + 1) * J] = 1.0
    for j in range(J):
        A[I + j, j::J] = 1.0
    for i in range(I):
        diff = Y - X[i]  # (J, d)
        for ell in range(d):
            A[I + J + i * d + ell, i * J : (i + 1) * J] = diff[:, ell]
    b = np.concatenate([m1.weights, m2.weights, np.zeros(I * d)])
    return A, b


def ot_plan(m1: DiscreteMeasure, m2: DiscreteMeasure, cost) -> Coupling:
    """Optimal transport plan between two discrete measures for the given
    cost matrix, via the specialized transportation simplex."""
    from . import transport  # deferred: keeps module import cheap

    cost = np.asarray(cost, dtype=float)
    if cost.shape != (m1.n, m2.n):
        raise ValueError("cost matrix shape does not match the atom counts")
    plan = transport.solve_transport(m1.weights, m2.weights, cost)
    return Coupling(m1, m2, plan)
