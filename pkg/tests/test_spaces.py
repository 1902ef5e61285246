"""Model spaces: distances, geodesics, midpoints, means and CAT(0) slack."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmlab.npc import (
    CuspFactor,
    Euclidean,
    GeometryInputError,
    HyperbolicPlane,
    Product,
    StarTree,
    audit_space,
    check_npc_quadruple,
    distance,
    frechet_mean,
    frechet_objective,
    geodesic_point,
    midpoint,
    product_space,
)
from harmlab.wp.strata import model_target

SPACES = {
    "euclidean": Euclidean(2),
    "hyperbolic": HyperbolicPlane(),
    "tree": StarTree.uniform(3),
    "cusp": CuspFactor(),
    "model": model_target(2),
}

finite = st.floats(-5, 5, allow_nan=False)


class TestDistance:
    def test_pythagoras(self):
        assert distance(Euclidean(2), [0, 0], [3, 4]) == pytest.approx(5.0, abs=1e-15)

    @pytest.mark.parametrize("name", SPACES)
    def test_self_distance_is_zero(self, name):
        space = SPACES[name]
        p = space.sample(np.random.default_rng(1), 20, 1.0)
        assert np.all(space.distance(p, p) <= 1e-12)

    def test_tree_path_through_center(self):
        t = StarTree.uniform(3)
        assert t.distance(t.point(1, 0.5), t.point(2, 0.5)) == pytest.approx(1.0, abs=1e-15)
        assert t.distance(t.point(1, 0.2), t.point(1, 0.7)) == pytest.approx(0.5, abs=1e-15)

    def test_hyperbolic_inner_product(self):
        h = HyperbolicPlane()
        p = h.basepoint()
        q = h.from_polar(1.0, 0.7)
        # -<p, q> = cosh(1) for points at distance 1
        mink = -p[0] * q[0] + p[1] * q[1] + p[2] * q[2]
        assert mink == pytest.approx(-np.cosh(1.0), rel=1e-14)
        assert h.distance(p, q) == pytest.approx(1.0, rel=1e-12)

    def test_hyperbolic_matches_half_plane_formula(self):
        # along the geodesic x1 = sinh(s), x2 = 0 distances are differences of s
        h = HyperbolicPlane()
        s = np.array([-1.3, 0.4, 2.2])
        pts = np.stack([np.cosh(s), np.sinh(s), np.zeros(3)], -1)
        assert h.distance(pts[0], pts[2]) == pytest.approx(3.5, rel=1e-12)

    def test_product_is_l2(self):
        prod = product_space([Euclidean(1), Euclidean(1)])
        assert prod.distance(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(5.0)

    def test_mismatched_point_rejected(self):
        with pytest.raises(GeometryInputError):
            HyperbolicPlane().validate([1.0, 0.0, 0.0, 0.0])
        with pytest.raises(GeometryInputError):
            HyperbolicPlane().validate([2.0, 0.0, 0.0])

    def test_empty_product_rejected(self):
        with pytest.raises(GeometryInputError):
            product_space([])


class TestGeodesics:
    @pytest.mark.parametrize("name", SPACES)
    def test_endpoints(self, name):
        space = SPACES[name]
        rng = np.random.default_rng(2)
        p, q = space.sample(rng, 50, 1.0), space.sample(rng, 50, 1.0)
        assert np.all(space.distance(space.geodesic_point(p, q, np.zeros(50)), p) <= 1e-9)
        assert np.all(space.distance(space.geodesic_point(p, q, np.ones(50)), q) <= 1e-9)

    @pytest.mark.parametrize("name", SPACES)
    def test_constant_speed(self, name):
        space = SPACES[name]
        rng = np.random.default_rng(3)
        p, q = space.sample(rng, 300, 1.0), space.sample(rng, 300, 1.0)
        s, t = rng.random(300), rng.random(300)
        d = space.distance(p, q)
        gap = space.distance(space.geodesic_point(p, q, s), space.geodesic_point(p, q, t))
        assert np.all(np.abs(gap - np.abs(s - t) * d) <= 1e-6 * np.maximum(d, 1e-12))

    def test_euclidean_interpolation(self):
        np.testing.assert_allclose(geodesic_point(Euclidean(2), [0, 0], [2, 0], 0.25), [0.5, 0.0])

    def test_tree_midpoint_is_center(self):
        t = StarTree.uniform(3)
        np.testing.assert_array_equal(t.geodesic_point(t.point(1, 1), t.point(2, 1), 0.5), t.point(0, 0))

    @pytest.mark.parametrize("t", [-0.1, 1.5, np.nan])
    def test_parameter_out_of_range(self, t):
        with pytest.raises(GeometryInputError):
            geodesic_point(Euclidean(2), [0, 0], [1, 1], t)

    def test_product_geodesic_is_factorwise(self):
        prod = product_space([HyperbolicPlane(), CuspFactor()])
        rng = np.random.default_rng(4)
        p, q = prod.sample(rng, 10, 1.0), prod.sample(rng, 10, 1.0)
        g = prod.geodesic_point(p, q, np.full(10, 0.3))
        np.testing.assert_allclose(g[:, :3], HyperbolicPlane().geodesic_point(p[:, :3], q[:, :3], np.full(10, 0.3)))
        np.testing.assert_allclose(g[:, 3:], CuspFactor().geodesic_point(p[:, 3:], q[:, 3:], np.full(10, 0.3)))


class TestMidpoint:
    def test_euclidean(self):
        np.testing.assert_allclose(midpoint(Euclidean(2), [0, 0], [4, 2]), [2, 1])

    @pytest.mark.parametrize("name", SPACES)
    def test_of_equal_points(self, name):
        space = SPACES[name]
        p = space.sample(np.random.default_rng(5), 1, 1.0)[0]
        assert space.distance(midpoint(space, p, p), p) <= 1e-12

    def test_cusp_radial(self):
        c = CuspFactor()
        np.testing.assert_allclose(midpoint(c, c.point(0.4, 0.0), c.point(0.2, 0.0)), [0.3, 0.0], atol=1e-15)


class TestQuadruple:
    @given(st.lists(finite, min_size=6, max_size=6))
    def test_euclidean_parallelogram_identity(self, xs):
        e = Euclidean(2)
        p, q, w = np.array(xs[:2]), np.array(xs[2:4]), np.array(xs[4:])
        assert abs(check_npc_quadruple(e, p, q, w)) <= 1e-12 * max(1.0, float(np.dot(xs, xs)))

    def test_tree_three_branches(self):
        t = StarTree.uniform(3)
        # 0.5*4 + 0.5*4 - 0.25*4 - 1 = 2
        assert check_npc_quadruple(t, t.point(1, 1), t.point(2, 1), t.point(3, 1)) == pytest.approx(2.0)

    @pytest.mark.parametrize("name", SPACES)
    def test_degenerate_pair(self, name):
        space = SPACES[name]
        rng = np.random.default_rng(6)
        p, w = space.sample(rng, 30, 1.0), space.sample(rng, 30, 1.0)
        assert np.all(np.abs(check_npc_quadruple(space, p, p, w)) <= 1e-9)

    @pytest.mark.parametrize("name", SPACES)
    def test_audit(self, name):
        res = audit_space(SPACES[name], samples=2000, seed=7)
        assert res.passed(exact=name == "euclidean")


class TestFrechetMean:
    def test_euclidean_equal_weights(self):
        np.testing.assert_allclose(frechet_mean(Euclidean(2), np.array([[0, 0], [2, 0]]), [1, 1]), [1, 0])

    def test_euclidean_unequal_weights(self):
        np.testing.assert_allclose(frechet_mean(Euclidean(2), np.array([[0, 0], [3, 0]]), [2, 1]), [1, 0],
                                   atol=1e-12)

    def test_tree_symmetric(self):
        t = StarTree.uniform(3)
        pts = np.array([t.point(k, 1.0) for k in (1, 2, 3)])
        np.testing.assert_array_equal(frechet_mean(t, pts, np.ones(3)), t.point(0, 0))

    def test_zero_weights_rejected(self):
        with pytest.raises(GeometryInputError):
            frechet_mean(Euclidean(1), np.array([[0.0], [1.0]]), np.zeros(2))

    @given(st.lists(st.tuples(finite, finite, st.floats(0.01, 3)), min_size=1, max_size=6))
    def test_euclidean_closed_form(self, rows):
        arr = np.array(rows)
        pts, w = arr[:, :2], arr[:, 2]
        expected = (w[:, None] * pts).sum(0) / w.sum()
        np.testing.assert_allclose(frechet_mean(Euclidean(2), pts, w), expected, atol=1e-9)

    @pytest.mark.parametrize("name", ["hyperbolic", "tree", "cusp", "model"])
    def test_beats_perturbed_candidates(self, name):
        space = SPACES[name]
        rng = np.random.default_rng(8)
        pts = space.sample(rng, 5, 1.0)
        w = rng.uniform(0.2, 2.0, 5)
        mean = frechet_mean(space, pts, w)
        best = frechet_objective(space, mean, pts, w)
        targets = space.sample(rng, 100, 1.0)
        steps = rng.uniform(0.0, 0.2, 100)
        cands = space.geodesic_point(np.broadcast_to(mean, targets.shape), targets, steps)
        vals = np.array([frechet_objective(space, c, pts, w) for c in cands])
        assert np.all(vals >= best - 1e-9 * max(best, 1.0))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_first_order_optimality_hyperbolic(self, seed):
        h = HyperbolicPlane()
        rng = np.random.default_rng(seed)
        pts = h.sample(rng, 4, 1.5)
        w = rng.uniform(0.1, 1.0, 4)
        mean = frechet_mean(h, pts, w)
        f0 = frechet_objective(h, mean, pts, w)
        for p in pts:
            step = h.geodesic_point(mean, p, 1e-4)
            assert frechet_objective(h, step, pts, w) >= f0 - 1e-10


def test_model_target_has_three_cusp_factors():
    m = model_target(2)
    assert isinstance(m, Product)
    assert len(m.factors) == 3 and all(isinstance(f, CuspFactor) for f in m.factors)
