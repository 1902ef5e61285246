"""Space-generic operations on NPC model spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from harmlab.npc.spaces import GeometryInputError, NpcSpace, Product


def _check_space(space):
    if not isinstance(space, NpcSpace):
        raise GeometryInputError(f"expected an NpcSpace, got {type(space).__name__}")


def distance(space: NpcSpace, p, q):
    _check_space(space)
    return space.distance(p, q)


def geodesic_point(space: NpcSpace, p, q, t):
    _check_space(space)
    return space.geodesic_point(p, q, t)


def midpoint(space: NpcSpace, p, q):
    _check_space(space)
    return space.geodesic_point(p, q, 0.5)


def check_npc_quadruple(space: NpcSpace, p, q, w):
    """Slack of the CAT(0) midpoint inequality for base ``w`` and segment ``pq``.

    Returns ``d^2(w,p)/2 + d^2(w,q)/2 - d^2(p,q)/4 - d^2(w, m)`` with ``m`` the
    midpoint of ``pq``; CAT(0) spaces give a nonnegative value.
    """
    _check_space(space)
    m = space.midpoint(p, q)
    dwp = space.distance(w, p)
    dwq = space.distance(w, q)
    dpq = space.distance(p, q)
    dwm = space.distance(w, m)
    return 0.5 * dwp**2 + 0.5 * dwq**2 - 0.25 * dpq**2 - dwm**2


def frechet_mean(space: NpcSpace, points, weights, init=None):
    _check_space(space)
    return space.frechet_mean(points, weights, init=init)


def frechet_objective(space: NpcSpace, x, points, weights):
    x = np.asarray(x, dtype=float)
    return np.sum(np.asarray(weights) * space.distance(x[..., None, :], points) ** 2, axis=-1)


def product_space(factors) -> Product:
    factors = tuple(factors)
    if not factors:
        raise GeometryInputError("product_space needs a nonempty factor list")
    for f in factors:
        _check_space(f)
    return Product(factors)


@dataclass
class AuditResult:
    """Outcome of a sampled audit of metric and CAT(0) properties."""

    space: str
    samples: int
    min_npc_slack: float
    max_symmetry_error: float
    min_triangle_slack: float
    max_speed_error: float
    max_abs_npc_slack: float = 0.0

    def passed(self, npc_tol: float = 1e-6, exact: bool = False) -> bool:
        slack_ok = self.max_abs_npc_slack <= 1e-12 if exact else self.min_npc_slack >= -npc_tol
        return (
            slack_ok
            and self.max_symmetry_error <= 1e-9
            and self.min_triangle_slack >= -1e-8
            and self.max_speed_error <= 1e-6
        )


def audit_space(space: NpcSpace, samples: int = 10_000, seed: int = 0, scale: float = 1.0) -> AuditResult:
    """Sample random triples/quadruples and measure metric and CAT(0) slack."""
    rng = np.random.default_rng(seed)
    p = space.sample(rng, samples, scale)
    q = space.sample(rng, samples, scale)
    w = space.sample(rng, samples, scale)
    dpq = space.distance(p, q)
    dqp = space.distance(q, p)
    sym = np.abs(dpq - dqp) / np.maximum(1.0, dpq)
    dpw = space.distance(p, w)
    dwq = space.distance(w, q)
    tri = dpw + dwq - dpq
    slack = check_npc_quadruple(space, p, q, w)
    s = rng.random(samples)
    t = rng.random(samples)
    gs = space.geodesic_point(p, q, s)
    gt = space.geodesic_point(p, q, t)
    speed = np.abs(space.distance(gs, gt) - np.abs(s - t) * dpq) / np.maximum(dpq, 1e-300)
    speed = np.where(dpq > 0, speed, 0.0)
    return AuditResult(
        space=space.describe(),
        samples=samples,
        min_npc_slack=float(slack.min()),
        max_symmetry_error=float(sym.max()),
        min_triangle_slack=float(tri.min()),
        max_speed_error=float(speed.max()),
        max_abs_npc_slack=float(np.abs(slack).max()),
    )
