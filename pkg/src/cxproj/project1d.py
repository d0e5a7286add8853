"""Explicit one-dimensional Wasserstein projections onto convex-order cones.

Everything here runs through one object: the integrated quantile
difference f(q) = ∫₀^q (F_mu^{-1} - F_nu^{-1}) dp and its largest convex
minorant ψ. Projecting mu down onto the measures dominated by nu in
convex order subtracts ψ's left derivative from mu's quantile; projecting
nu up onto the measures dominating mu adds it to nu's quantile. Both
projections are the W_rho minimizers for every rho > 1 simultaneously,
and the common distance is the L^rho norm of ψ' — see
`distance_identity_check`. The monotone map realizing both distances and
the irreducible components it is built from round out the module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvexOrderError
from .hull import (
    PiecewiseLinear,
    convex_hull,
    integrated_quantile_diff,
    merge_breakpoints,
)
from .measures import DiscreteMeasure, leq_cx_1d, quantile, w_rho_1d

_COMPONENT_TOL = 1e-12


@dataclass
class Projection1DResult:
    """Outcome of a 1D projection.

    Attributes
    ----------
    projected : DiscreteMeasure
        The projection (down: same weights as mu; up: at most I+J atoms).
    psi : PiecewiseLinear
        The hull the construction differentiates: the convex minorant ψ
        for downward projections, the concave majorant ψ̃ for upward
        ones. Both yield the same |slope| profile.
    transport_pairs : list of (source atom, image point, weight)
        Monotone coupling between the input being moved and its
        projection, cell by cell on the shared quantile grid.
    """

    projected: DiscreteMeasure
    psi: PiecewiseLinear
    transport_pairs: list

    def distance_for(self, rho):
        """(∫₀¹ |ψ'(u-)|^rho du)^(1/rho), the W_rho projection distance."""
        if rho < 1.0:
            raise ValueError(f"rho must be >= 1, got {rho}")
        slopes = np.abs(self.psi.slopes())
        lengths = np.diff(self.psi.nodes)
        return float(np.dot(slopes**rho, lengths) ** (1.0 / rho))


@dataclass
class IrreducibleComponents:
    """Maximal open intervals on which convex-order domination is strict.

    q_intervals live on the quantile axis ({q : f(q) > 0}), t_intervals
    on the real line ({t : E(t-X)+ < E(t-Y)+}); entry n of one
    corresponds to entry n of the other.
    """

    q_intervals: list
    t_intervals: list

    def __len__(self):
        return len(self.q_intervals)


def _require_1d(*measures):
    for m in measures:
        if m.dim != 1:
            raise ValueError("explicit projections require 1-dimensional measures")


def _cell_slopes(psi, cells):
    """ψ'(·-) evaluated on the open cells between consecutive breakpoints.

    `cells` is the increasing breakpoint vector (including 0 and 1);
    returns one slope per cell, taken at the midpoint. Valid because ψ
    only ever kinks at breakpoints of the measure whose cells these are.
    """
    mids = 0.5 * (cells[:-1] + cells[1:])
    idx = np.clip(
        np.searchsorted(psi.nodes, mids, side="right") - 1,
        0,
        psi.nodes.shape[0] - 2,
    )
    seg = (psi.values[idx + 1] - psi.values[idx]) / (psi.nodes[idx + 1] - psi.nodes[idx])
    return seg


def project_down(mu, nu):
    """Project mu onto the measures dominated by nu in convex order.

    Returns the W_rho-closest measure to mu (any rho > 1) among those
    below nu; it keeps mu's weights and moves atom i by the hull slope
    on its quantile cell, so its mean is mean(nu).
    """
    _require_1d(mu, nu)
    qm = quantile(mu)
    f = integrated_quantile_diff(qm, quantile(nu))
    psi = convex_hull(f)
    slopes = _cell_slopes(psi, qm.breakpoints)
    z = qm.values - slopes
    projected = DiscreteMeasure(z, np.diff(qm.breakpoints))
    pairs = [
        (float(x), float(zi), float(w))
        for x, zi, w in zip(qm.values, z, np.diff(qm.breakpoints))
    ]
    return Projection1DResult(projected=projected, psi=psi, transport_pairs=pairs)


def project_up(nu, mu):
    """Project nu onto the measures dominating mu in convex order.

    The quantile of the projection is F_nu^{-1} - ψ̃'(·-) where ψ̃ is the
    concave hull of q ↦ ∫_q¹(F_mu^{-1}-F_nu^{-1}); it has at most I+J
    atoms, carries the cell lengths of the merged breakpoint grid as
    weights, and has mean(mu).
    """
    _require_1d(nu, mu)
    qn = quantile(nu)
    f = integrated_quantile_diff(quantile(mu), qn)
    psi = convex_hull(f)
    # Concave hull of the upper-tail integral g = f(1) - f, without
    # recomputing: the hull of a reflected function is the reflected hull.
    psi_tilde = PiecewiseLinear(psi.nodes, float(f.values[-1]) - psi.values)
    grid = merge_breakpoints(qn.breakpoints, psi.nodes)
    z = qn(0.5 * (grid[:-1] + grid[1:])) - _cell_slopes(psi_tilde, grid)
    weights = np.diff(grid)
    projected = DiscreteMeasure(z, weights)
    pairs = [
        (float(qn(m)), float(zi), float(w))
        for m, zi, w in zip(0.5 * (grid[:-1] + grid[1:]), z, weights)
    ]
    return Projection1DResult(projected=projected, psi=psi_tilde, transport_pairs=pairs)


def distance_identity_check(mu, nu, rho):
    """The three expressions for the projection distance, in order
    (W_rho(nu_up, nu), W_rho(mu, mu_down), L^rho norm of ψ').

    They coincide up to roundoff; returning all three lets callers and
    tests assert that instead of trusting it.
    """
    _require_1d(mu, nu)
    down = project_down(mu, nu)
    up = project_up(nu, mu)
    return (
        w_rho_1d(up.projected, nu, rho),
        w_rho_1d(mu, down.projected, rho),
        down.distance_for(rho),
    )


def irreducible_components(mu, nu):
    """Decompose a convex-order pair mu <=cx nu into irreducible pieces.

    q_intervals are the maximal open intervals where
    f(q) = ∫₀^q(F_mu^{-1}-F_nu^{-1}) is strictly positive. t_intervals
    are the maximal open intervals where the put potentials
    E(t-X)+ < E(t-Y)+ strictly, read off the merged atom grid; their
    endpoints are atoms because the potential difference is piecewise
    linear and nonpositive. Strictness means beyond 1e-12 * scale.
    """
    _require_1d(mu, nu)
    if not leq_cx_1d(mu, nu):
        raise ConvexOrderError("mu is not dominated by nu in convex order")
    scale = max(1.0, mu.abs_moment(), nu.abs_moment())
    tol = _COMPONENT_TOL * scale

    f = integrated_quantile_diff(quantile(mu), quantile(nu))
    pos = f.values > tol
    pos[0] = pos[-1] = False  # f(0) = 0 and f(1) is mean noise, not a component
    q_intervals = [
        (float(f.nodes[a - 1]), float(f.nodes[b + 1]))
        for a, b in _runs(pos)
    ]

    grid = np.union1d(mu.atoms[:, 0], nu.atoms[:, 0])
    neg = _put_potential(mu, grid) - _put_potential(nu, grid) < -tol
    neg[0] = neg[-1] = False
    t_intervals = [
        (float(grid[a - 1]), float(grid[b + 1]))
        for a, b in _runs(neg)
    ]
    return IrreducibleComponents(q_intervals=q_intervals, t_intervals=t_intervals)


def _runs(mask):
    """Maximal runs of True as (first, last) index pairs."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    return [(int(idx[s]), int(idx[e])) for s, e in zip(starts, ends)]


def _put_potential(m, ts):
    """E(t - X)+ for each t in ts; piecewise linear with kinks at atoms."""
    x = m.atoms[:, 0]
    cw = np.concatenate(([0.0], np.cumsum(m.weights)))
    cwx = np.concatenate(([0.0], np.cumsum(m.weights * x)))
    k = np.searchsorted(x, ts, side="right")
    return ts * cw[k] - cwx[k]


def transport_map(mu, nu):
    """The monotone map realizing both projection distances at once.

    T shifts by the hull's chord slope strictly inside each irreducible
    component of (mu, nu_up) and is the quantile/cdf composition
    F_nu^{-1} ∘ F_{nu_up} outside; it pushes mu to project_down(mu, nu)
    and nu_up = project_up(nu, mu) to nu. Returns (x, T(x)) pairs over
    the union of both supports.
    """
    _require_1d(mu, nu)
    down = project_down(mu, nu)
    nu_up = project_up(nu, mu).projected
    comps = irreducible_components(mu, nu_up)
    psi = down.psi
    qn = quantile(nu)
    cdf_up = nu_up.cdf
    nu_cum = np.cumsum(nu.weights)

    shifts = [
        (psi(q_hi) - psi(q_lo)) / (q_hi - q_lo)
        for q_lo, q_hi in comps.q_intervals
    ]
    xs = np.union1d(mu.atoms[:, 0], nu_up.atoms[:, 0])
    pairs = []
    for x in xs:
        image = None
        for (t_lo, t_hi), s in zip(comps.t_intervals, shifts, strict=True):
            if t_lo < x < t_hi:
                image = x - s
                break
        if image is None:
            # Outside the components mu and nu_up coincide and the cum
            # value of x is a shared breakpoint of nu_up's and nu's
            # grids, but the two cumsums can disagree by a few ulps,
            # which would flip the left-continuous inverse onto the
            # wrong atom; snap to nu's breakpoint before inverting.
            p = float(cdf_up(np.array([x]))[0])
            j = int(np.searchsorted(nu_cum, p))
            for c in nu_cum[max(j - 1, 0):j + 1]:
                if abs(p - c) <= 32.0 * np.finfo(float).eps:
                    p = float(c)
                    break
            # Rounding can also push p a few ulps past either end of
            # (0, 1]; both ends select the extreme atom, so clamping
            # is exact.
            image = float(qn(min(max(p, np.finfo(float).tiny), 1.0)))
        pairs.append((float(x), float(image)))
    return pairs
