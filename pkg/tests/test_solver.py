"""Relaxation solver, lattice diagnostics and the empirical uniqueness test."""

import numpy as np
import pytest

from harmlab.domain import (
    Edge,
    EquivariantMap,
    GainGraph,
    bouquet,
    constant_map,
    cycle,
    d2_distance,
    energy_value,
    grid,
    grid_coordinates,
    path,
    random_map,
)
from harmlab.experiments.problems import ProfileHarmonicMap, sor_factor
from harmlab.npc import CuspFactor, Euclidean, GeometryInputError, HyperbolicPlane, StarTree
from harmlab.solver import (
    CONVERGED,
    TRACE_COLUMNS,
    Schedule,
    boundary_map,
    image_geometry,
    minimize,
    pde_residual,
    prolong,
    relax_vertex,
    subsolution_check,
    uniqueness_test,
)
from harmlab.wp.isometry import apply_isometry, parse_word
from harmlab.wp.metric import ChartDegenerateError
from harmlab.wp.strata import model_target


class TestRelaxVertex:
    def test_middle_of_path_moves_to_mean(self):
        g = path(3, Euclidean(1))
        out = relax_vertex(g, EquivariantMap(np.array([[0.0], [5.0], [2.0]])), 1)
        assert out.values[1, 0] == pytest.approx(1.0, abs=1e-12)

    def test_weighted_mean(self):
        g = GainGraph(Euclidean(1), (1.0,) * 3, (Edge(0, 1, 3.0), Edge(1, 2, 1.0)))
        out = relax_vertex(g, EquivariantMap(np.array([[0.0], [5.0], [4.0]])), 1)
        assert out.values[1, 0] == pytest.approx(1.0, abs=1e-12)

    def test_gain_carries_neighbor(self):
        # the closing edge (2, 0) carries shift(2): vertex 0 sees u1 = 1 and u2 - 2 = 3
        g = cycle(3, Euclidean(1), "shift(2)")
        out = relax_vertex(g, EquivariantMap(np.array([[7.0], [1.0], [5.0]])), 0)
        assert out.values[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_tree_neighbors_on_three_branches(self):
        t = StarTree.uniform(3)
        g = GainGraph(t, (1.0,) * 4, (Edge(0, 1), Edge(0, 2), Edge(0, 3)))
        vals = np.array([t.point(1, 0.4), t.point(1, 1), t.point(2, 1), t.point(3, 1)])
        out = relax_vertex(g, EquivariantMap(vals), 0)
        np.testing.assert_array_equal(out.values[0], t.point(0, 0))

    def test_optimal_vertex_stays(self):
        # the geodesic midpoint of two unit-weight neighbors is their Fréchet mean
        h = HyperbolicPlane()
        a, b = h.from_polar(1.2, 0.3), h.from_polar(0.8, 2.5)
        u = EquivariantMap(np.array([a, h.midpoint(a, b), b]))
        moved = relax_vertex(path(3, h), u, 1)
        assert h.distance(moved.values[1], u.values[1]) <= 1e-10

    def test_pinned_vertex_unchanged(self):
        g = path(3, Euclidean(1), pinned=(1,))
        u = EquivariantMap(np.array([[0.0], [5.0], [2.0]]))
        np.testing.assert_array_equal(relax_vertex(g, u, 1).values, u.values)

    def test_never_raises_energy(self):
        g = cycle(6, model_target(), "tau1*tau2")
        u = random_map(g, np.random.default_rng(0))
        for v in range(6):
            w = relax_vertex(g, u, v)
            assert energy_value(g, w) <= energy_value(g, u) + 1e-12
            u = w

    def test_out_of_range(self):
        g = path(3, Euclidean(1))
        with pytest.raises(GeometryInputError):
            relax_vertex(g, random_map(g, np.random.default_rng(0)), 3)


class TestTranslationCycle:
    """A cycle of n vertices with a translation of length T has minimal energy T^2 / n."""

    @pytest.mark.parametrize("order", ["random", "colored", "sequential"])
    def test_euclidean(self, order):
        g = cycle(8, Euclidean(1), "shift(1)")
        u, trace = minimize(g, random_map(g, np.random.default_rng(1)), Schedule(order=order))
        assert trace.final_energy == pytest.approx(1 / 8, abs=1e-8)
        # equally spaced: every edge, the closing one included, has length 1/8
        steps = np.diff(np.append(u.values[:, 0], u.values[0, 0] + 1.0))
        np.testing.assert_allclose(steps, 1 / 8, atol=1e-6)

    def test_euclidean_plane(self):
        g = cycle(8, Euclidean(2), "shift(0.6,0.8)")
        _, trace = minimize(g, random_map(g, np.random.default_rng(2)))
        assert trace.final_energy == pytest.approx(1 / 8, abs=1e-8)

    def test_hyperbolic(self):
        g = cycle(8, HyperbolicPlane(), "hyp(1)")
        _, trace = minimize(g, random_map(g, np.random.default_rng(3)))
        assert trace.final_energy == pytest.approx(1 / 8, abs=1e-6)

    def test_hyperbolic_minimizer_is_on_axis(self):
        g = cycle(8, HyperbolicPlane(), "hyp(1)")
        u, _ = minimize(g, random_map(g, np.random.default_rng(4)))
        _, on_geodesic, _ = image_geometry(g, u, tol=1e-4)
        assert on_geodesic


class TestTwistCollapse:
    def test_reaches_stratum(self):
        g = cycle(8, model_target(), "tau1")
        u, trace = minimize(g, random_map(g, np.random.default_rng(0)))
        assert u.values[:, 0].max() < 1e-3
        assert trace.final_energy < 1e-6
        assert trace.collapsed and trace.sweeps <= 10_000

    def test_other_factors_become_constant(self):
        g = cycle(8, model_target(), "tau1")
        u, _ = minimize(g, random_map(g, np.random.default_rng(5)))
        c = CuspFactor()
        for k in (2, 4):
            block = u.values[:, k:k + 2]
            assert c.distance(block[:, None, :], block[None, :, :]).max() < 1e-3


class TestTrace:
    def test_energy_never_increases(self):
        g = cycle(10, model_target(), "tau1*tau2^2")
        _, trace = minimize(g, random_map(g, np.random.default_rng(6)), Schedule(max_sweeps=200))
        e = trace.energies
        assert np.all(np.diff(e) <= 0)

    def test_columns(self):
        g = cycle(5, HyperbolicPlane(), "hyp(1)")
        _, trace = minimize(g, random_map(g, np.random.default_rng(7)), Schedule(max_sweeps=3))
        assert [len(r) for r in trace.rows] == [len(TRACE_COLUMNS)] * 4
        np.testing.assert_array_equal(trace.column("sweep"), [0, 1, 2, 3])

    def test_zero_sweeps_returns_initial_map(self):
        g = cycle(5, Euclidean(1), "shift(1)")
        init = random_map(g, np.random.default_rng(8))
        u, trace = minimize(g, init, Schedule(max_sweeps=0))
        np.testing.assert_array_equal(u.values, init.values)
        assert trace.sweeps == 0

    def test_deterministic(self):
        g = cycle(7, model_target(), "tau1*tau3")
        init = random_map(g, np.random.default_rng(9))
        a, ta = minimize(g, init, seed=4)
        b, tb = minimize(g, init, seed=4)
        np.testing.assert_array_equal(a.values, b.values)
        assert ta.rows == tb.rows

    @pytest.mark.parametrize("kwargs", [{"order": "shuffled"}, {"max_sweeps": -1}, {"omega": 2.0}])
    def test_bad_schedule(self, kwargs):
        with pytest.raises(GeometryInputError):
            Schedule(**kwargs)


class TestEquivariance:
    """Isometries commuting with the gains map minimizers to minimizers."""

    def test_twists_commute_with_minimization(self):
        m = model_target()
        g = cycle(4, m, "tau1*tau2")
        gamma = parse_word("tau2^3*tau3^-1")
        init = random_map(g, np.random.default_rng(10))
        moved = EquivariantMap(apply_isometry(gamma, init.values, m))
        # each relaxation step commutes with gamma, so a few sweeps suffice
        sched = Schedule(order="sequential", max_sweeps=15)
        a, _ = minimize(g, init, sched)
        b, _ = minimize(g, moved, sched)
        expected = EquivariantMap(apply_isometry(gamma, a.values, m))
        assert d2_distance(g, b, expected) <= 1e-8

    def test_translation_along_axis(self):
        h = HyperbolicPlane()
        g = cycle(6, h, "hyp(1.2)")
        gamma = parse_word("hyp(0.4)")
        init = random_map(g, np.random.default_rng(11))
        sched = Schedule(order="colored", max_sweeps=300)
        a, _ = minimize(g, init, sched)
        b, _ = minimize(g, EquivariantMap(apply_isometry(gamma, init.values, h)), sched)
        assert d2_distance(g, b, EquivariantMap(apply_isometry(gamma, a.values, h))) <= 1e-8


class TestLatticeDiagnostics:
    def test_affine_map_has_zero_residual(self):
        g = grid(7, 7, Euclidean(1))
        xy = grid_coordinates(g)
        u = EquivariantMap((2 * xy[:, 0] - 3 * xy[:, 1] + 0.5)[:, None])
        assert np.abs(pde_residual(g, u)).max() <= 1e-10

    def test_constant_map_has_zero_residual(self):
        g = grid(5, 5, Euclidean(2))
        u = constant_map(g, [1.0, -2.0])
        assert np.abs(pde_residual(g, u)).max() == 0.0

    def test_quadratic_residual_is_its_laplacian(self):
        g = grid(6, 6, Euclidean(1))
        xy = grid_coordinates(g)
        u = EquivariantMap((xy[:, 0] ** 2 + xy[:, 1] ** 2)[:, None])
        np.testing.assert_allclose(pde_residual(g, u), 4.0, rtol=1e-9)

    def test_exact_profile_residual_is_second_order(self):
        exact = ProfileHarmonicMap()
        res = []
        for n in (9, 17, 33, 65):
            g = grid(n, n, CuspFactor())
            res.append(np.abs(pde_residual(g, boundary_map(g, exact))).max())
        ratios = np.array(res[:-1]) / np.array(res[1:])
        # halving h divides an O(h^2) truncation error by 4 once asymptotic
        assert np.all(np.diff(ratios) > 0)
        assert ratios[-1] == pytest.approx(4.0, rel=0.1)

    def test_chart_rejects_stratum(self):
        g = grid(5, 5, CuspFactor())
        u = constant_map(g, CuspFactor().point(0.0, 0.0))
        with pytest.raises(ChartDegenerateError):
            pde_residual(g, u)

    def test_needs_grid(self):
        g = path(4, Euclidean(1))
        with pytest.raises(GeometryInputError):
            pde_residual(g, random_map(g, np.random.default_rng(0)))

    def test_subsolution_of_constant_positive_map(self):
        g = grid(5, 5, CuspFactor())
        rep = subsolution_check(g, constant_map(g, CuspFactor().point(0.3, 0.1)))
        assert rep.constant == 0.0 and rep.fraction_satisfied == 1.0

    def test_subsolution_fit_for_convex_profile(self):
        # u = 1 + x^2 has Lap u = 2, so C = max 2 / u = 2 at x = 0
        g = grid(9, 9, Euclidean(1))
        xy = grid_coordinates(g)
        rep = subsolution_check(g, EquivariantMap((1 + xy[:, 0] ** 2)[:, None]), tol=0.0)
        assert rep.constant == pytest.approx(2 / (1 + (1 / 8) ** 2), rel=1e-9)
        assert rep.fraction_satisfied == 1.0

    def test_prolong_keeps_coarse_values(self):
        coarse, fine = grid(5, 5, CuspFactor()), grid(9, 9, CuspFactor())
        u = boundary_map(coarse, ProfileHarmonicMap())
        up = prolong(coarse, u, fine).values.reshape(9, 9, 2)
        np.testing.assert_array_equal(up[0::2, 0::2], u.values.reshape(5, 5, 2))

    def test_sor_factor_range(self):
        assert 1.0 < sor_factor(9) < sor_factor(17) < 2.0


class TestUniqueness:
    def test_two_axes_unique(self):
        g = bouquet(4, HyperbolicPlane(), ["hyp(1,0)", "hyp(1,1.5707963267948966)"])
        rep = uniqueness_test(g, range(5))
        assert not rep.degenerate
        assert rep.max_pairwise_d2 <= 1e-4

    def test_euclidean_translation_is_flagged(self):
        # translates of the minimizer along the line are also minimizers
        g = cycle(8, Euclidean(1), "shift(1)")
        rep = uniqueness_test(g, range(3))
        assert rep.on_geodesic and rep.degenerate

    def test_identity_gains_flag_constant(self):
        g = cycle(6, HyperbolicPlane())
        rep = uniqueness_test(g, range(3))
        assert rep.constant and rep.degenerate

    def test_pinned_lattice_is_unique(self):
        # boundary values fix a unique affine minimizer
        g = grid(5, 5, Euclidean(1))
        xy = grid_coordinates(g)
        base = EquivariantMap((xy[:, 0] + 2 * xy[:, 1])[:, None])
        rep = uniqueness_test(g, range(5), Schedule(order="colored", tol_move=1e-12), base=base)
        assert rep.max_pairwise_d2 <= 1e-8
        assert all(t == CONVERGED for t in rep.terminations)

    def test_needs_two_seeds(self):
        with pytest.raises(GeometryInputError):
            uniqueness_test(cycle(4, Euclidean(1), "shift(1)"), [0])

    def test_pins_need_base(self):
        with pytest.raises(GeometryInputError):
            uniqueness_test(grid(4, 4, Euclidean(1)), [0, 1])
