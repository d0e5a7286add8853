"""Explicit 1-D projections: frozen hand examples and exact identities.

The frozen expectations below are derived by hand from the quantile
calculus: f(q) = integral of (F_mu^{-1} - F_nu^{-1}) over [0, q], psi its
largest convex minorant, downward projection x_i - psi' on mu's cells,
upward projection F_nu^{-1} + psi' on the merged grid.
"""

import numpy as np
import pytest
from conftest import random_cx_pair, random_measure

from cxproj.errors import ConvexOrderError
from cxproj.measures import DiscreteMeasure, leq_cx_1d, w_rho_1d
from cxproj.project1d import (
    distance_identity_check,
    irreducible_components,
    project_down,
    project_up,
    transport_map,
)

IDENTITY_TOL = 1e-10
MEAN_TOL = 1e-12
RHOS = (1.5, 2.0, 3.0)


class TestProjectDown:
    def test_hand_example_two_against_three_atoms(self):
        # mu = (delta_-3 + delta_3)/2, nu = delta_-1/4 + delta_0/2 + delta_1/4.
        # Quantile gaps -2, -3, +3, +2 on the quarter cells integrate to the
        # W shape (0, -1/2, -5/4, -1/2, 0); its convex hull is the V through
        # (1/2, -5/4) with slopes -5/2 and +5/2, so both atoms move by 5/2
        # and the squared distance is 25/4.
        mu = DiscreteMeasure([-3.0, 3.0])
        nu = DiscreteMeasure([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
        res = project_down(mu, nu)
        assert np.allclose(res.projected.x, [-0.5, 0.5], atol=1e-14)
        assert np.allclose(res.projected.weights, [0.5, 0.5], atol=1e-15)
        assert res.distance_for(2.0) == pytest.approx(2.5, abs=1e-14)
        assert np.allclose(res.psi.nodes, [0.0, 0.5, 1.0])
        assert np.allclose(res.psi.values, [0.0, -1.25, 0.0])

    def test_already_dominated_is_fixed_point(self):
        mu = DiscreteMeasure([0.0])
        nu = DiscreteMeasure([-1.0, 1.0])
        res = project_down(mu, nu)
        assert np.array_equal(res.projected.x, mu.x)
        assert res.distance_for(2.0) == 0.0
        assert np.allclose(res.psi.values, 0.0)

    def test_ordered_random_pairs_unchanged(self):
        rng = np.random.default_rng(501)
        for _ in range(50):
            mu, nu = random_cx_pair(rng)
            res = project_down(mu, nu)
            # random_cx_pair matches the means only up to rounding, so
            # the fixed point is exact only to atom-level float dust.
            scale = max(1.0, mu.abs_moment())
            assert res.projected.n == mu.n
            assert np.max(np.abs(res.projected.x - mu.x)) < 1e-12 * scale
            assert np.allclose(res.projected.weights, mu.weights, atol=1e-15)

    def test_output_dominated_and_mean_matches_target(self):
        rng = np.random.default_rng(502)
        for _ in range(50):
            mu, nu = random_measure(rng), random_measure(rng)
            res = project_down(mu, nu)
            assert leq_cx_1d(res.projected, nu)
            assert res.projected.mean()[0] == pytest.approx(
                nu.mean()[0], abs=MEAN_TOL
            )

    def test_projection_idempotent(self):
        rng = np.random.default_rng(503)
        for _ in range(25):
            mu, nu = random_measure(rng), random_measure(rng)
            first = project_down(mu, nu).projected
            again = project_down(first, nu)
            assert w_rho_1d(first, again.projected, 2.0) < 1e-10
            assert again.distance_for(2.0) < 1e-10

    def test_transport_pairs_push_mu_onto_projection(self):
        mu = DiscreteMeasure([-3.0, 3.0])
        nu = DiscreteMeasure([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
        res = project_down(mu, nu)
        xs = np.array([p[0] for p in res.transport_pairs])
        zs = np.array([p[1] for p in res.transport_pairs])
        ws = np.array([p[2] for p in res.transport_pairs])
        assert np.array_equal(xs, mu.x)
        assert np.allclose(ws, mu.weights)
        rebuilt = DiscreteMeasure(zs, ws)
        assert w_rho_1d(rebuilt, res.projected, 2.0) < 1e-14

    def test_rejects_multidimensional(self):
        square = DiscreteMeasure([[0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(ValueError):
            project_down(square, square)


class TestProjectUp:
    def test_point_mass_grows_to_reference(self):
        # Projecting delta_0 upward onto measures dominating
        # (delta_-1 + delta_1)/2: any dominating measure has second moment
        # >= 1, and W2 to delta_0 is the root second moment, so the
        # reference itself is the unique optimum.
        nu = DiscreteMeasure([0.0])
        mu_ref = DiscreteMeasure([-1.0, 1.0])
        res = project_up(nu, mu_ref)
        assert np.allclose(res.projected.x, [-1.0, 1.0], atol=1e-14)
        assert np.allclose(res.projected.weights, [0.5, 0.5])
        assert res.distance_for(2.0) == pytest.approx(1.0, abs=1e-14)

    def test_narrow_pair_grows_to_wide_reference(self):
        # nu = (+-1)/2 against reference (+-2)/2: quantile gap is -1 then
        # +1, psi is the V with slopes -1, +1, and the projection moves
        # each atom outward onto +-2 at distance 1.
        nu = DiscreteMeasure([-1.0, 1.0])
        mu_ref = DiscreteMeasure([-2.0, 2.0])
        res = project_up(nu, mu_ref)
        assert np.allclose(res.projected.x, [-2.0, 2.0], atol=1e-14)
        assert res.distance_for(2.0) == pytest.approx(1.0, abs=1e-14)

    def test_output_dominates_and_mean_matches_reference(self):
        # Everything dominating mu in convex order shares mu's mean, so
        # the projection inherits the reference mean, not nu's.
        rng = np.random.default_rng(504)
        for _ in range(50):
            mu, nu = random_measure(rng), random_measure(rng)
            res = project_up(nu, mu)
            assert leq_cx_1d(mu, res.projected)
            assert res.projected.mean()[0] == pytest.approx(
                mu.mean()[0], abs=MEAN_TOL
            )
            assert res.projected.n <= mu.n + nu.n - 1

    def test_ordered_random_pairs_unchanged(self):
        rng = np.random.default_rng(505)
        for _ in range(50):
            mu, nu = random_cx_pair(rng)
            res = project_up(nu, mu)
            assert w_rho_1d(res.projected, nu, 2.0) < 1e-12


class TestTranslationRecovery:
    def test_shifted_copy_projects_back(self):
        # Projecting a translate of the reference recovers the reference
        # and the distance is exactly the shift, for every index rho.
        rng = np.random.default_rng(506)
        base = random_measure(rng, n_max=20)
        for alpha in (0.1, 1.0, 5.0):
            shifted = DiscreteMeasure(base.x + alpha, base.weights)
            down = project_down(shifted, base)
            assert w_rho_1d(down.projected, base, 2.0) < 1e-9
            up = project_up(shifted, base)
            assert w_rho_1d(up.projected, base, 2.0) < 1e-9
            for rho in RHOS:
                assert down.distance_for(rho) == pytest.approx(alpha, abs=1e-9)
                assert up.distance_for(rho) == pytest.approx(alpha, abs=1e-9)


class TestDistanceIdentity:
    def test_three_quantities_agree(self):
        rng = np.random.default_rng(507)
        for _ in range(50):
            mu, nu = random_measure(rng), random_measure(rng)
            scale = max(1.0, mu.abs_moment() + nu.abs_moment())
            for rho in RHOS:
                up_dist, down_dist, hull_dist = distance_identity_check(mu, nu, rho)
                assert abs(up_dist - hull_dist) < IDENTITY_TOL * scale
                assert abs(down_dist - hull_dist) < IDENTITY_TOL * scale

    def test_hull_formula_matches_direct_distance(self):
        rng = np.random.default_rng(508)
        for _ in range(25):
            mu, nu = random_measure(rng), random_measure(rng)
            res = project_down(mu, nu)
            for rho in RHOS:
                direct = w_rho_1d(mu, res.projected, rho)
                assert abs(direct - res.distance_for(rho)) < 1e-9

    def test_rho_validation(self):
        mu = DiscreteMeasure([-1.0, 1.0])
        res = project_down(mu, mu)
        with pytest.raises(ValueError):
            res.distance_for(0.8)


class TestIrreducibleComponents:
    def test_single_component(self):
        mu = DiscreteMeasure([-0.5, 0.5])
        nu = DiscreteMeasure([-1.0, 1.0])
        comps = irreducible_components(mu, nu)
        assert len(comps) == 1
        q_lo, q_hi = comps.q_intervals[0]
        t_lo, t_hi = comps.t_intervals[0]
        assert (q_lo, q_hi) == (0.0, 1.0)
        assert (t_lo, t_hi) == (-1.0, 1.0)

    def test_two_symmetric_components(self):
        # mu = (+-2)/2 inside nu = quarters at +-1, +-3: the integrated
        # quantile gap returns to zero at the median, splitting the pair
        # into mirror components (-3,-1) and (1,3).
        mu = DiscreteMeasure([-2.0, 2.0])
        nu = DiscreteMeasure([-3.0, -1.0, 1.0, 3.0])
        comps = irreducible_components(mu, nu)
        assert len(comps) == 2
        assert comps.q_intervals == [(0.0, 0.5), (0.5, 1.0)]
        assert comps.t_intervals == [(-3.0, -1.0), (1.0, 3.0)]

    def test_identical_measures_have_no_components(self):
        m = DiscreteMeasure([-1.0, 0.0, 2.0], [0.3, 0.4, 0.3])
        comps = irreducible_components(m, m)
        assert len(comps) == 0

    def test_unordered_pair_rejected(self):
        wide = DiscreteMeasure([-2.0, 2.0])
        narrow = DiscreteMeasure([-1.0, 1.0])
        with pytest.raises(ConvexOrderError):
            irreducible_components(wide, narrow)

    def test_structure_on_random_ordered_pairs(self):
        rng = np.random.default_rng(509)
        for _ in range(100):
            mu, nu = random_cx_pair(rng)
            comps = irreducible_components(mu, nu)
            assert len(comps.q_intervals) == len(comps.t_intervals)
            support = np.union1d(mu.x, nu.x)
            prev_q = prev_t = -np.inf
            for (q_lo, q_hi), (t_lo, t_hi) in zip(
                comps.q_intervals, comps.t_intervals
            ):
                assert 0.0 <= q_lo < q_hi <= 1.0
                assert t_lo < t_hi
                assert q_lo >= prev_q and t_lo >= prev_t
                prev_q, prev_t = q_hi, t_hi
                # interval ends sit on atoms of one of the measures
                assert np.min(np.abs(support - t_lo)) < 1e-12
                assert np.min(np.abs(support - t_hi)) < 1e-12
                # the mass carried by [t_lo, t_hi] covers the quantile span
                in_cl = (mu.x >= t_lo) & (mu.x <= t_hi)
                assert mu.weights[in_cl].sum() >= q_hi - q_lo - 1e-9


class TestTransportMap:
    def test_pushes_mu_onto_downward_projection(self):
        rng = np.random.default_rng(510)
        for _ in range(50):
            mu, nu = random_measure(rng), random_measure(rng)
            pairs = dict(transport_map(mu, nu))
            images = np.array([pairs[float(x)] for x in mu.x])
            rebuilt = DiscreteMeasure(images, mu.weights)
            target = project_down(mu, nu).projected
            # W_2 is Hoelder-1/2 in the weights, so eps-level weight
            # dust from renormalization shows up at sqrt(eps) ~ 1e-8.
            assert w_rho_1d(rebuilt, target, 2.0) < 1e-7

    def test_pushes_upward_projection_onto_nu(self):
        rng = np.random.default_rng(511)
        for _ in range(50):
            mu, nu = random_measure(rng), random_measure(rng)
            nu_up = project_up(nu, mu).projected
            pairs = dict(transport_map(mu, nu))
            images = np.array([pairs[float(x)] for x in nu_up.x])
            rebuilt = DiscreteMeasure(images, nu_up.weights)
            assert w_rho_1d(rebuilt, nu, 2.0) < 1e-7

    def test_map_is_monotone(self):
        rng = np.random.default_rng(512)
        for _ in range(25):
            mu, nu = random_measure(rng), random_measure(rng)
            pairs = transport_map(mu, nu)
            xs = np.array([p[0] for p in pairs])
            ys = np.array([p[1] for p in pairs])
            order = np.argsort(xs)
            assert np.all(np.diff(ys[order]) > -1e-12)
