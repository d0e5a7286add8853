"""Quadratic Wasserstein projection onto a convex-order cone in any dimension.

Minimizes sum_i p_i |x_i - m_i(R)|^2 over couplings R of (mu, nu), where
m_i(R) = (sum_j R_ij y_j) / p_i is the row barycenter vector. The
pushforward of mu by the optimal barycenters is exactly the W_2
projection of mu onto the measures dominated by nu in convex order, and
the optimal transport plan between mu and that projection is the
diagonal one (atom i stays on atom i with mass p_i).

The solver is fully corrective Frank-Wolfe: the linear subproblem over
the polytope is a transportation LP (one vertex per call, at most
I+J-1 nonzeros), and after each new vertex the objective is minimized
exactly over the convex hull of all vertices collected so far by an
active-set least-squares step. The duality gap <grad, R - V> certifies
the returned objective.
"""

from __future__ import annotations

import time

import numpy as np

from . import transport
from .coupling import Coupling, SolveReport
from .measures import DiscreteMeasure

_DEFAULT_MAX_ITER = 50_000


def fw_linear_oracle(gradient, mu, nu):
    """Vertex of the transportation polytope minimizing <gradient, R>."""
    gradient = np.asarray(gradient, dtype=float)
    plan = transport.solve_transport(mu.weights, nu.weights, gradient)
    return Coupling(mu, nu, plan)


def _sparse_barycenters(rows, cols, vals, Y, p):
    """Row barycenters (sum_j v_ij y_j) / p_i of a sparse plan."""
    acc = np.zeros((p.shape[0], Y.shape[1]))
    np.add.at(acc, rows, vals[:, None] * Y[cols])
    return acc / p[:, None]


def _corrective_weights(A, At_t, lam, free, max_rounds):
    """min ||A lam - t||^2 over the probability simplex, active-set.

    A holds one column per vertex (sqrt(p)-weighted flattened
    barycenters), At_t = A^T t. `lam` is a feasible start and `free`
    marks coordinates allowed to move; both are modified in place and
    the final lam is returned. Finite termination in exact arithmetic;
    the round cap only guards against floating-point dithering (the
    outer loop re-certifies with a fresh gap either way).
    """
    K = A.shape[1]
    AtA = A.T @ A
    for _ in range(max_rounds):
        idx = np.flatnonzero(free)
        k = idx.size
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * AtA[np.ix_(idx, idx)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([2.0 * At_t[idx], [1.0]])
        try:
            sol = np.linalg.solve(kkt, rhs)[:k]
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
        cand = np.zeros(K)
        cand[idx] = sol

        neg = cand[idx] < -1e-12
        if neg.any():
            # Step from lam toward cand until the first coordinate hits 0.
            dec = idx[(cand[idx] < lam[idx]) & (lam[idx] > 0.0)]
            if dec.size == 0:
                # Offenders already sit at 0; re-pin them instead.
                bad = idx[neg & (lam[idx] <= 0.0)]
                free[bad] = False
                if not free.any():
                    free[idx[0]] = True
                continue
            ratios = lam[dec] / (lam[dec] - cand[dec])
            alpha = min(1.0, float(ratios.min()))
            lam += alpha * (cand - lam)
            hit = lam[idx] <= 1e-14
            lam[idx[hit]] = 0.0
            free[idx[hit]] = False
            if not free.any():
                free[idx[0]] = True
            continue

        lam[:] = 0.0
        lam[idx] = np.clip(cand[idx], 0.0, None)
        lam /= lam.sum()
        # Pricing: free the pinned coordinate with the most negative
        # reduced gradient, if any.
        g = 2.0 * (AtA @ lam - At_t)
        nu_eq = float(g[idx].mean())
        w = g - nu_eq
        w[free] = 0.0
        worst = int(np.argmin(w))
        if w[worst] >= -1e-12 * (1.0 + float(np.max(np.abs(g)))):
            return lam
        free[worst] = True
    return lam


def project_qp(mu, nu, tol_gap=None, max_iter=_DEFAULT_MAX_ITER, rho=2.0,
               _start_plan=None):
    """W_2 projection of mu onto {eta : eta <=cx nu}, any dimension.

    Parameters
    ----------
    mu, nu : DiscreteMeasure
        Measures of a common dimension.
    tol_gap : float, optional
        Duality-gap target; defaults to 1e-8 * (initial objective + 1).
    max_iter : int, optional
        Outer iteration cap; hitting it returns the best iterate with
        report.certified = False instead of raising.
    rho : float, optional
        Only 2 is supported: the objective is quadratic by design and
        rho = 1 admits non-unique minimizers. Other exponents live in
        the one-dimensional module, where the answer is rho-independent.
    _start_plan : ndarray, optional
        Alternative feasible starting plan (testing hook; the default is
        the northwest-corner vertex).

    Returns
    -------
    ProjectionQpResult
        With the optimal coupling, barycenter vectors, the projected
        measure (barycenters weighted by mu's weights), and a report
        whose `gap` field certifies optimality of `objective`.
    """
    if rho != 2.0:
        raise ValueError("project_qp minimizes a quadratic; only rho=2 is supported")
    if mu.dim != nu.dim:
        raise ValueError("mu and nu must share a dimension")
    if tol_gap is not None and tol_gap <= 0.0:
        raise ValueError("tol_gap must be positive")
    t0 = time.perf_counter()
    X = mu.atoms
    Y = nu.atoms
    p = mu.weights
    I, d = X.shape

    if _start_plan is None:
        plan0, rows0, cols0 = transport.nw_corner(p, nu.weights)
        vals0 = plan0[rows0, cols0]
    else:
        plan0 = np.asarray(_start_plan, dtype=float)
        rows0, cols0 = np.nonzero(plan0)
        vals0 = plan0[rows0, cols0]
    vertices = [(rows0, cols0, vals0)]
    barys = [_sparse_barycenters(rows0, cols0, vals0, Y, p)]
    lam = np.array([1.0])

    sqrt_p = np.sqrt(p)[:, None]
    t_vec = (sqrt_p * X).ravel()
    cols = [(sqrt_p * barys[0]).ravel()]

    gap = np.inf
    certified = False
    iterations = 0
    obj = 0.0
    M = barys[0]
    for iterations in range(1, max_iter + 1):
        M = np.einsum("k,kid->id", lam, np.array(barys))
        diff = X - M
        obj = float(np.sum(p[:, None] * diff * diff))
        if iterations == 1 and tol_gap is None:
            tol_gap = 1e-8 * (obj + 1.0)
        # d f / d R_ij = -2 (x_i - m_i) . y_j: the p_i from the weight
        # cancels against the 1/p_i inside the barycenter.
        G = -2.0 * diff @ Y.T
        vtx = transport.solve_transport(p, nu.weights, G)
        vr, vc = np.nonzero(vtx)
        vv = vtx[vr, vc]
        B_new = _sparse_barycenters(vr, vc, vv, Y, p)
        # <G, R> and <G, V> via barycenters (sum_j R_ij y_j = p_i m_i)
        g_R = -2.0 * float(np.sum(p[:, None] * diff * M))
        g_V = -2.0 * float(np.sum(p[:, None] * diff * B_new))
        gap = g_R - g_V
        if gap <= tol_gap:
            certified = True
            break

        vertices.append((vr, vc, vv))
        barys.append(B_new)
        cols.append((sqrt_p * B_new).ravel())
        lam = np.concatenate([lam, [0.0]])
        A = np.column_stack(cols)
        free = (lam > 0.0).copy()
        free[-1] = True
        lam = _corrective_weights(A, A.T @ t_vec, lam, free,
                                  max_rounds=20 * lam.shape[0] + 40)
        keep = lam > 1e-14
        if not keep.any():
            keep[int(np.argmax(lam))] = True
        vertices = [v for v, k in zip(vertices, keep) if k]
        barys = [b for b, k in zip(barys, keep) if k]
        cols = [c for c, k in zip(cols, keep) if k]
        lam = lam[keep]
        lam /= lam.sum()

    R = np.zeros((I, Y.shape[0]))
    for w, (vr, vc, vv) in zip(lam, vertices):
        np.add.at(R, (vr, vc), w * vv)
    coupling = Coupling(mu, nu, R)
    projected = DiscreteMeasure(M, p)
    report = SolveReport(
        iterations=iterations,
        objective=obj,
        gap=float(gap),
        marginal_residuals=coupling.marginal_residuals(),
        wall_time=time.perf_counter() - t0,
        certified=certified,
        notes={"vertices": len(vertices), "backend": transport.BACKEND},
    )
    return ProjectionQpResult(
        coupling=coupling, barycenters=M, projected=projected, report=report
    )


class ProjectionQpResult:
    """Coupling, barycenters m_i, projected measure, and solve report."""

    __slots__ = ("coupling", "barycenters", "projected", "report")

    def __init__(self, coupling, barycenters, projected, report):
        self.coupling = coupling
        self.barycenters = barycenters
        self.projected = projected
        self.report = report

    def __repr__(self):
        return (
            f"ProjectionQpResult(objective={self.report.objective:.6g}, "
            f"gap={self.report.gap:.3g}, iterations={self.report.iterations}, "
            f"certified={self.report.certified})"
        )
