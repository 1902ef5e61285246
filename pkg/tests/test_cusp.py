"""Cusp factor geodesics against the path-relaxation and grid oracles."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from harmlab.npc import CuspFactor
from harmlab.wp import cusp
from harmlab.wp.metric import ModelMetric, loglog_slope
from harmlab.wp.paths import grid_distance, path_distance, relax_path, segment_length

radius = st.floats(0.02, 1.5)
twist_angle = st.floats(-3.0, 3.0)


def pt(u, th):
    return np.array([u, th], dtype=float)


class TestClosedForms:
    def test_same_twist_is_radial(self):
        assert cusp.distance(pt(0.5, 0.7), pt(0.2, 0.7)) == pytest.approx(0.3, abs=1e-15)

    @pytest.mark.parametrize("a", [1e-3, 0.1, 0.9, 4.0])
    def test_distance_to_cusp_point(self, a):
        assert cusp.distance(pt(a, 1.3), pt(0.0, np.nan)) == pytest.approx(a, rel=1e-15)

    def test_cusp_point_to_itself(self):
        assert cusp.distance(pt(0.0, np.nan), pt(0.0, np.nan)) == 0.0

    def test_level_path_is_an_upper_bound(self):
        # the constant-u path costs u^3 / 2 per unit twist
        for a in (0.05, 0.3, 0.8):
            assert cusp.distance(pt(a, 0.0), pt(a, 1.0)) <= a**3 / 2

    def test_displacement_law(self):
        a = np.geomspace(1e-2, 1e-1, 12)
        d = cusp.distance(np.stack([a, 0 * a], -1), np.stack([a, 0 * a + 1.0], -1))
        assert loglog_slope(a, d) == pytest.approx(3.0, abs=0.1)

    def test_twist_invariance(self):
        rng = np.random.default_rng(0)
        p, q = CuspFactor().sample(rng, 50, 1.0), CuspFactor().sample(rng, 50, 1.0)
        shift = np.array([0.0, 2.5])
        np.testing.assert_allclose(cusp.distance(p + shift, q + shift), cusp.distance(p, q), rtol=1e-12)


class TestAgainstPathRelaxation:
    @settings(max_examples=20, deadline=None)
    @given(radius, twist_angle, radius, twist_angle)
    def test_distance(self, a, s, b, t):
        p, q = pt(a, s), pt(b, t)
        ref = path_distance(p, q, tol=1e-8)
        assert cusp.distance(p, q) == pytest.approx(ref, rel=1e-6, abs=1e-12)

    def test_relaxed_path_passes_near_closed_form_points(self):
        p, q = pt(0.6, -1.0), pt(0.4, 1.5)
        path = relax_path(p, q, segments=256)
        ts = np.linspace(0, 1, 257)
        exact = cusp.geodesic_point(np.broadcast_to(p, (257, 2)), np.broadcast_to(q, (257, 2)), ts)
        d = CuspFactor().distance(path.points, exact)
        assert d.max() <= 1e-3 * cusp.distance(p, q)


@pytest.fixture(scope="module")
def pairs():
    c = CuspFactor()
    rng = np.random.default_rng(0)
    p, q = c.sample(rng, 100, 1.0), c.sample(rng, 100, 1.0)
    return p, q, c.distance(p, q)


class TestRandomPairs:
    """One hundred random pairs from the cusp sampler (10% at the cusp point)."""

    @pytest.mark.slow
    def test_path_relaxation_oracle(self, pairs):
        p, q, exact = pairs
        ref = np.array([path_distance(a, b, tol=1e-8) for a, b in zip(p, q)])
        np.testing.assert_allclose(exact, ref, rtol=1e-6, atol=1e-12)

    def test_grid_paths_are_never_shorter(self, pairs):
        p, q, exact = pairs
        ref = np.array([grid_distance(a, b) for a, b in zip(p, q)])
        assert np.all(ref >= exact * (1 - 1e-12))


class TestAgainstGrid:
    def test_random_pairs_fitted_window(self):
        c = CuspFactor()
        rng = np.random.default_rng(11)
        p, q = c.sample(rng, 10, 1.0), c.sample(rng, 10, 1.0)
        exact = c.distance(p, q)
        ref = np.array([grid_distance(a, b, window="path", budget=14400, stencil=10) for a, b in zip(p, q)])
        assert np.all(ref >= exact * (1 - 1e-12))
        np.testing.assert_allclose(exact, ref, rtol=1e-3)

    @pytest.mark.parametrize("a", [1e-2, 3e-2, 1e-1])
    def test_displacement(self, a):
        assert cusp.distance(pt(a, 0), pt(a, 1)) == pytest.approx(grid_distance(pt(a, 0), pt(a, 1)), rel=1e-3)


class TestGeodesicPoint:
    @settings(max_examples=30, deadline=None)
    @given(radius, twist_angle, radius, twist_angle, st.floats(0, 1), st.floats(0, 1))
    def test_constant_speed(self, a, s, b, t, x, y):
        p, q = pt(a, s), pt(b, t)
        d = cusp.distance(p, q)
        gx, gy = cusp.geodesic_point(p, q, x), cusp.geodesic_point(p, q, y)
        assert cusp.distance(gx, gy) == pytest.approx(abs(x - y) * d, abs=1e-9 * max(d, 1e-3))

    def test_geodesic_through_interior_stays_positive(self):
        ts = np.linspace(0.01, 0.99, 50)
        pts = cusp.geodesic_point(np.broadcast_to(pt(0.3, -2), (50, 2)), np.broadcast_to(pt(0.4, 2), (50, 2)), ts)
        assert np.all(pts[:, 0] > 0)

    def test_leg_into_cusp(self):
        g = cusp.geodesic_point(pt(0.4, 1.0), pt(0.0, np.nan), 0.5)
        assert g[0] == pytest.approx(0.2) and g[1] == 1.0


class TestGradient:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 1.2), twist_angle, st.floats(0.1, 1.2), twist_angle)
    def test_matches_finite_differences(self, a, s, b, t):
        p, q = pt(a, s), pt(b, t)
        # the distance is not differentiable where p = q
        assume(cusp.distance(p, q) > 1e-3)
        _, du, dth = cusp.distance_gradient(p, q)
        h = 1e-6
        fd_u = (cusp.distance(p + [h, 0], q) - cusp.distance(p - [h, 0], q)) / (2 * h)
        fd_t = (cusp.distance(p + [0, h], q) - cusp.distance(p - [0, h], q)) / (2 * h)
        assert du == pytest.approx(fd_u, abs=1e-6)
        assert dth == pytest.approx(fd_t, abs=1e-6)


def test_segment_length_of_radial_segment():
    assert segment_length(ModelMetric(), pt(0.2, 0.0), pt(0.5, 0.0)) == pytest.approx(0.3)
