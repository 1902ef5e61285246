"""Concrete NPC (CAT(0)) model spaces.

Points are plain float arrays whose last axis holds the coordinates of one
point; every method broadcasts over the leading axes, so a batch of ``n``
points in the hyperbolic plane is an ``(n, 3)`` array.

Coordinates per kind:

* ``Euclidean(dim)``: ``dim`` reals.
* ``HyperbolicPlane``: hyperboloid coordinates ``(x0, x1, x2)`` with
  ``x0^2 - x1^2 - x2^2 = 1`` and ``x0 > 0``.
* ``StarTree``: ``(branch, r)`` with branch in ``1..m`` stored as a float and
  ``0 <= r <= length[branch]``; the center is canonically ``(0, 0)``.
* ``CuspFactor``: ``(u, theta)`` with ``u >= 0``; ``theta`` is ``nan`` exactly
  when ``u == 0``.
* ``Product``: factor coordinates concatenated in order.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from harmlab.wp import cusp


class GeometryInputError(ValueError):
    """Raised for points, parameters or spaces that violate an input contract."""


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)) or np.any(~np.isfinite(t)):
        raise GeometryInputError("geodesic parameter t must lie in [0, 1]")
    return t


def _check_weights(weights):
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or np.any(~np.isfinite(w)):
        raise GeometryInputError("weights must be finite and nonnegative")
    if np.any(w.sum(axis=-1) <= 0):
        raise GeometryInputError("at least one weight must be positive")
    return w


class NpcSpace(ABC):
    """A geodesic metric space satisfying the CAT(0) comparison."""

    kind: str = "abstract"
    #: tolerance for metric identities; 1e-9 closed form, 1e-6 numerical
    tolerance: float = 1e-9

    @property
    @abstractmethod
    def dim(self) -> int:
        """Length of one coordinate vector."""

    @abstractmethod
    def _validate(self, p: np.ndarray) -> None: ...

    def validate(self, p) -> np.ndarray:
        """Return ``p`` as a float array after checking the per-kind constraint."""
        p = np.asarray(p, dtype=float)
        if p.ndim == 0 or p.shape[-1] != self.dim:
            raise GeometryInputError(
                f"{self.kind} points need {self.dim} coordinates, got shape {p.shape}"
            )
        self._validate(p)
        return p

    def canonical(self, p) -> np.ndarray:
        return self.validate(p)

    @abstractmethod
    def distance(self, p, q) -> np.ndarray: ...

    @abstractmethod
    def geodesic_point(self, p, q, t) -> np.ndarray: ...

    def midpoint(self, p, q) -> np.ndarray:
        return self.geodesic_point(p, q, 0.5)

    def frechet_mean(self, points, weights, init=None) -> np.ndarray:
        """Minimizer of ``sum_i w_i d^2(x, p_i)`` over the last-but-one axis."""
        return geodesic_averaging_mean(self, points, weights)

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
        """``n`` random points, spread roughly ``scale`` from a basepoint."""

    @abstractmethod
    def basepoint(self) -> np.ndarray: ...

    def is_same_point(self, p, q, atol: float = 0.0) -> np.ndarray:
        return self.distance(p, q) <= atol

    def describe(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Euclidean(NpcSpace):
    n: int = 2
    kind = "euclidean"

    def __post_init__(self):
        if self.n < 1:
            raise GeometryInputError("Euclidean dimension must be positive")

    @property
    def dim(self) -> int:
        return self.n

    def _validate(self, p):
        if not np.all(np.isfinite(p)):
            raise GeometryInputError("Euclidean coordinates must be finite")

    def distance(self, p, q):
        p, q = self.validate(p), self.validate(q)
        return np.sqrt(np.sum((p - q) ** 2, axis=-1))

    def geodesic_point(self, p, q, t):
        p, q = self.validate(p), self.validate(q)
        t = _check_t(t)[..., None]
        return (1.0 - t) * p + t * q

    def frechet_mean(self, points, weights, init=None):
        points = self.validate(points)
        w = _check_weights(weights)
        return np.sum(w[..., None] * points, axis=-2) / w.sum(axis=-1)[..., None]

    def sample(self, rng, n, scale=1.0):
        return rng.uniform(-scale, scale, size=(n, self.n))

    def basepoint(self):
        return np.zeros(self.n)

    def describe(self):
        return f"euclidean({self.n})"


def minkowski_dot(x, y):
    return -x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] + x[..., 2] * y[..., 2]


def _sinhc(x):
    """``sinh(x) / x`` with the removable singularity filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(xs) / xs)


@dataclass(frozen=True)
class HyperbolicPlane(NpcSpace):
    """Curvature -1 plane in the hyperboloid model."""

    kind = "hyperbolic"

    @property
    def dim(self) -> int:
        return 3

    def _validate(self, p):
        sq = p * p
        norm = sq[..., 0] - sq[..., 1] - sq[..., 2]
        scale = 1.0 + sq[..., 0] + sq[..., 1] + sq[..., 2]
        # nan and inf fail the comparison and land in the error branch
        ok = (np.abs(norm - 1.0) <= 1e-8 * scale) & (p[..., 0] > 0)
        if not ok.all():
            if not np.isfinite(p).all():
                raise GeometryInputError("hyperboloid coordinates must be finite")
            raise GeometryInputError("point is not on the upper hyperboloid sheet")

    @staticmethod
    def project(x):
        # rebuilding x0 from the spatial part stays accurate far from the basepoint,
        # where normalizing by the Minkowski norm suffers cancellation
        x = np.asarray(x, dtype=float)
        return HyperbolicPlane.lift(x[..., 1:])

    @staticmethod
    def lift(xy):
        """Hyperboloid point over the planar coordinates ``(x1, x2)``."""
        xy = np.asarray(xy, dtype=float)
        x0 = np.sqrt(1.0 + np.sum(xy * xy, axis=-1))
        return np.concatenate([x0[..., None], xy], axis=-1)

    @staticmethod
    def from_polar(r, angle):
        r = np.asarray(r, dtype=float)
        angle = np.asarray(angle, dtype=float)
        return np.stack(
            [np.cosh(r), np.sinh(r) * np.cos(angle), np.sinh(r) * np.sin(angle)], axis=-1
        )

    @staticmethod
    def _distance(p, q):
        diff = p - q
        chord = np.sqrt(np.maximum(minkowski_dot(diff, diff), 0.0))
        return 2.0 * np.arcsinh(0.5 * chord)

    def distance(self, p, q):
        return self._distance(self.validate(p), self.validate(q))

    def log(self, x, p):
        """Initial velocity of the unit-time geodesic from ``x`` to ``p``."""
        d = self._distance(x, p)
        v = p + minkowski_dot(x, p)[..., None] * x
        return v / _sinhc(d)[..., None]

    def exp(self, x, v):
        nv = np.sqrt(np.maximum(minkowski_dot(v, v), 0.0))
        out = np.cosh(nv)[..., None] * x + _sinhc(nv)[..., None] * v
        return self.project(out)

    def geodesic_point(self, p, q, t):
        p, q = self.validate(p), self.validate(q)
        t = _check_t(t)
        d = self._distance(p, q)
        # sinh((1-t)d)/sinh(d) and sinh(td)/sinh(d), stable as d -> 0
        s = _sinhc(d)
        a = (1.0 - t) * _sinhc((1.0 - t) * d) / s
        b = t * _sinhc(t * d) / s
        out = self.project(a[..., None] * p + b[..., None] * q)
        out = np.where(np.asarray(t)[..., None] == 0, p, out)
        return np.where(np.asarray(t)[..., None] == 1, q, out)

    def frechet_mean(self, points, weights, init=None, max_iter=200, tol=1e-10):
        points = self.validate(points)
        w = _check_weights(weights)
        w = np.broadcast_to(w, points.shape[:-1])
        total = w.sum(axis=-1)
        if init is None:
            x = self.project(np.sum(w[..., None] * points, axis=-2))
        else:
            x = self.validate(init).copy()
        for _ in range(max_iter):
            xb = x[..., None, :]
            d = self._distance(xb, points)
            grad = np.sum(w[..., None] * self.log(xb, points), axis=-2)
            # Hessian of d^2/2 is at most d coth d; damping by it never overshoots
            dcoth = np.where(d < 1e-8, 1.0, d / np.tanh(np.where(d < 1e-8, 1.0, d)))
            step = grad / np.sum(w * dcoth, axis=-1)[..., None]
            x = self.exp(x, step)
            size = np.sqrt(np.maximum(minkowski_dot(step, step), 0.0))
            if np.all(size < tol):
                break
        return x

    def translation(self, length: float, axis_angle: float = 0.0) -> np.ndarray:
        """Lorentz matrix translating by ``length`` along the axis through the
        basepoint in direction ``axis_angle``."""
        c, s = math.cos(axis_angle), math.sin(axis_angle)
        rot = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
        ch, sh = math.cosh(length), math.sinh(length)
        boost = np.array([[ch, sh, 0], [sh, ch, 0], [0, 0, 1.0]])
        return rot @ boost @ rot.T

    def sample(self, rng, n, scale=1.0):
        # uniform in the disk of radius `scale` with respect to area
        u = rng.random(n)
        r = np.arccosh(1.0 + u * (np.cosh(scale) - 1.0))
        return self.from_polar(r, rng.uniform(0, 2 * np.pi, n))

    def basepoint(self):
        return np.array([1.0, 0.0, 0.0])

    def describe(self):
        return "hyperbolic"


@dataclass(frozen=True)
class StarTree(NpcSpace):
    """Metric star: ``m`` segments glued at a common center."""

    lengths: tuple = (1.0, 1.0, 1.0)
    kind = "star_tree"

    def __post_init__(self):
        if len(self.lengths) < 1:
            raise GeometryInputError("a star tree needs at least one branch")
        if any(not (x >= 0) for x in self.lengths):
            raise GeometryInputError("branch lengths must be nonnegative")
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))

    @classmethod
    def uniform(cls, branch_count: int, length: float = 1.0) -> "StarTree":
        return cls(tuple([float(length)] * branch_count))

    @property
    def branch_count(self) -> int:
        return len(self.lengths)

    @property
    def dim(self) -> int:
        return 2

    def _validate(self, p):
        b, r = p[..., 0], p[..., 1]
        if np.any(b != np.round(b)) or np.any(b < 0) or np.any(b > self.branch_count):
            raise GeometryInputError("branch index out of range")
        if np.any(r < 0) or np.any(~np.isfinite(r)):
            raise GeometryInputError("arc length must be finite and nonnegative")
        caps = np.concatenate([[0.0], self.lengths])[b.astype(int)]
        if np.any(r > caps * (1 + 1e-12) + 1e-15):
            raise GeometryInputError("arc length exceeds the branch length")
        if np.any((b == 0) & (r != 0)):
            raise GeometryInputError("branch 0 is reserved for the center")

    def point(self, branch, r):
        branch = np.asarray(branch, dtype=float)
        r = np.asarray(r, dtype=float)
        p = np.stack(np.broadcast_arrays(branch, r), axis=-1)
        return self.canonical(p)

    @staticmethod
    def _canon(p):
        center = p[..., 1] <= 0
        return np.where(center[..., None], 0.0, p)

    def canonical(self, p):
        p = np.asarray(p, dtype=float)
        return self.validate(self._canon(p))

    def distance(self, p, q):
        p, q = self.validate(p), self.validate(q)
        same = p[..., 0] == q[..., 0]
        return np.where(same, np.abs(p[..., 1] - q[..., 1]), p[..., 1] + q[..., 1])

    def geodesic_point(self, p, q, t):
        p, q = self.validate(p), self.validate(q)
        t = _check_t(t)
        d = self.distance(p, q)
        same = p[..., 0] == q[..., 0]
        s = t * d  # arc travelled from p
        r_same = p[..., 1] + t * (q[..., 1] - p[..., 1])
        on_p = s < p[..., 1]
        branch = np.where(same, p[..., 0], np.where(on_p, p[..., 0], q[..., 0]))
        r = np.where(same, r_same, np.where(on_p, p[..., 1] - s, s - p[..., 1]))
        out = self._canon(np.stack([branch, np.maximum(r, 0.0)], axis=-1))
        out = np.where(np.asarray(t)[..., None] == 0, p, out)
        return np.where(np.asarray(t)[..., None] == 1, q, out)

    def frechet_mean(self, points, weights, init=None):
        # On branch k the objective restricted to that branch is a quadratic in
        # the arc length; at most one branch has a positive unconstrained optimum.
        points = self.validate(points)
        w = np.broadcast_to(_check_weights(weights), points.shape[:-1])
        total = w.sum(axis=-1)
        br, r = points[..., 0], points[..., 1]
        best_branch = np.zeros(total.shape)
        best_r = np.zeros(total.shape)
        signed_all = -np.sum(w * r, axis=-1)
        for k in range(1, self.branch_count + 1):
            on_k = br == k
            signed = signed_all + 2.0 * np.sum(np.where(on_k, w * r, 0.0), axis=-1)
            s = np.minimum(signed / total, self.lengths[k - 1])
            take = s > 0
            best_branch = np.where(take, k, best_branch)
            best_r = np.where(take, s, best_r)
        return np.stack([best_branch, best_r], axis=-1)

    def sample(self, rng, n, scale=1.0):
        b = rng.integers(1, self.branch_count + 1, n)
        caps = np.array(self.lengths)[b - 1]
        r = rng.uniform(0, 1, n) * np.minimum(caps, scale)
        return self.canonical(np.stack([b.astype(float), r], axis=-1))

    def basepoint(self):
        return np.zeros(2)

    def describe(self):
        return "star_tree(" + ",".join(f"{x:g}" for x in self.lengths) + ")"


@dataclass(frozen=True)
class CuspFactor(NpcSpace):
    """One completed cusp factor ``du^2 + (u^6/4) dtheta^2`` (see ``wp.cusp``)."""

    kind = "cusp"
    tolerance = 1e-6

    @property
    def dim(self) -> int:
        return 2

    def _validate(self, p):
        u, th = p[..., 0], p[..., 1]
        if np.any(~np.isfinite(u)) or np.any(u < 0):
            raise GeometryInputError("cusp radius u must be finite and >= 0")
        if np.any(np.isnan(th) != (u == 0)):
            raise GeometryInputError("twist must be nan exactly on the cusp point u == 0")
        if np.any(np.isinf(th)):
            raise GeometryInputError("twist must be finite")

    @staticmethod
    def point(u, theta):
        u = np.asarray(u, dtype=float)
        theta = np.asarray(theta, dtype=float)
        u, theta = np.broadcast_arrays(u, theta)
        return np.stack([u, np.where(u == 0, np.nan, theta)], axis=-1)

    def canonical(self, p):
        p = np.asarray(p, dtype=float)
        return self.validate(self.point(p[..., 0], p[..., 1]))

    def is_same_point(self, p, q, atol=0.0):
        return self.distance(p, q) <= atol

    def distance(self, p, q):
        return cusp.distance(self.validate(p), self.validate(q))

    def geodesic_point(self, p, q, t):
        p, q = self.validate(p), self.validate(q)
        t = _check_t(t)
        return cusp.geodesic_point(p, q, t)

    def objective(self, x, points, w):
        return np.sum(w * cusp.distance(x[..., None, :], points) ** 2, axis=-1)

    def _gradient(self, x, points, w):
        d, gu, gth = cusp.distance_gradient(x[..., None, :], points)
        return (
            np.sum(w * d * d, axis=-1),
            np.stack([np.sum(2 * w * d * gu, axis=-1), np.sum(2 * w * d * gth, axis=-1)], -1),
        )

    def frechet_mean(self, points, weights, init=None, max_iter=200, tol=1e-12):
        """Damped Newton in ``(u, theta)`` with an analytic gradient.

        The gradient of ``d(x, p)`` is the negated unit tangent of the
        geodesic toward ``p`` (its twist part is the Clairaut constant); the
        Hessian is a central difference of that gradient.
        """
        points = self.validate(points)
        w = np.broadcast_to(_check_weights(weights), points.shape[:-1]).astype(float)
        batch = points.shape[:-2]
        pts = points.reshape((-1,) + points.shape[-2:])
        ww = w.reshape((-1, w.shape[-1]))
        active = ww > 0
        interior = active & (pts[..., 0] > 0)
        # the cusp point is the mean only when every weighted point is on it
        all_cusp = ~interior.any(axis=-1)
        total = ww.sum(axis=-1)
        if init is None:
            u0 = np.sum(ww * pts[..., 0], axis=-1) / total
            th_w = np.where(interior, ww, 0.0)
            th0 = np.sum(th_w * np.nan_to_num(pts[..., 1]), axis=-1) / np.maximum(
                th_w.sum(axis=-1), 1e-300
            )
            x = np.stack([u0, th0], axis=-1)
        else:
            x = np.array(np.broadcast_to(self.validate(init), batch + (2,)), dtype=float)
            x = x.reshape(-1, 2)
            fresh = x[:, 0] <= 0
            if fresh.any():
                u0 = np.sum(ww * pts[..., 0], axis=-1) / total
                th_w = np.where(interior, ww, 0.0)
                th0 = np.sum(th_w * np.nan_to_num(pts[..., 1]), axis=-1) / np.maximum(
                    th_w.sum(axis=-1), 1e-300
                )
                x[fresh] = np.stack([u0, th0], -1)[fresh]
        x[all_cusp] = [0.0, np.nan]
        todo = ~all_cusp
        for _ in range(max_iter):
            if not todo.any():
                break
            idx = np.flatnonzero(todo)
            xs, ps, ws = x[idx], pts[idx], ww[idx]
            u = xs[:, 0]
            hu = 1e-5 * u
            hth = 2e-5 / u**2
            # value, gradient and the four central-difference stencils in one batch
            zero = np.zeros_like(u)
            shifts = np.stack(
                [np.stack(s, -1) for s in ((zero, zero), (hu, zero), (-hu, zero), (zero, hth), (zero, -hth))]
            )
            fs, gs = self._gradient(xs[None] + shifts, ps[None], ws[None])
            f0, g = fs[0], gs[0]
            hess = np.empty((idx.size, 2, 2))
            hess[:, :, 0] = (gs[1] - gs[2]) / (2 * hu[:, None])
            hess[:, :, 1] = (gs[3] - gs[4]) / (2 * hth[:, None])
            hess = 0.5 * (hess + np.swapaxes(hess, 1, 2))
            det = hess[:, 0, 0] * hess[:, 1, 1] - hess[:, 0, 1] ** 2
            pd = (hess[:, 0, 0] > 0) & (det > 0)
            safe_det = np.where(pd, det, 1.0)
            newton = -np.stack(
                [
                    hess[:, 1, 1] * g[:, 0] - hess[:, 0, 1] * g[:, 1],
                    -hess[:, 0, 1] * g[:, 0] + hess[:, 0, 0] * g[:, 1],
                ],
                axis=-1,
            ) / safe_det[:, None]
            # metric-preconditioned gradient as fallback direction
            metric_inv = np.stack([np.ones_like(u), 4.0 / u**6], axis=-1)
            fallback = -metric_inv * g / (2.0 * ws.sum(axis=-1))[:, None]
            step = np.where(pd[:, None], newton, fallback)
            descent = np.sum(step * g, axis=-1)
            bad = descent >= 0
            step[bad] = fallback[bad]
            descent = np.sum(step * g, axis=-1)
            # keep u positive: never shrink it by more than a factor 4 per step
            alpha = np.ones(idx.size)
            shrink = step[:, 0] < -0.75 * u
            alpha[shrink] = -0.75 * u[shrink] / step[shrink, 0]
            accepted = np.zeros(idx.size, dtype=bool)
            for _ls in range(40):
                trial = xs + alpha[:, None] * step
                f1 = self.objective(trial, ps, ws)
                # allow rounding-level ties so converged entries stop at once
                ok = f1 <= f0 + 1e-4 * alpha * descent + 1e-14 * np.abs(f0)
                accepted |= ok
                if accepted.all():
                    break
                alpha = np.where(accepted, alpha, 0.5 * alpha)
            moved = np.where(accepted[:, None], alpha[:, None] * step, 0.0)
            x[idx] = xs + moved
            size = np.sqrt(moved[:, 0] ** 2 + (x[idx, 0] ** 3 / 2) ** 2 * moved[:, 1] ** 2)
            done = (size <= tol * np.maximum(1.0, u)) | ~accepted
            todo[idx[done]] = False
        return self.point(x[:, 0], x[:, 1]).reshape(batch + (2,))

    def sample(self, rng, n, scale=1.0, cusp_fraction=0.1):
        u = rng.uniform(0, scale, n)
        u[rng.random(n) < cusp_fraction] = 0.0
        th = rng.uniform(-2 * scale, 2 * scale, n)
        return self.point(u, th)

    def basepoint(self):
        return self.point(1.0, 0.0)

    def describe(self):
        return "cusp"


@dataclass(frozen=True)
class Product(NpcSpace):
    """l2 product of factor spaces; geodesics and means are factorwise."""

    factors: tuple = field(default_factory=tuple)
    kind = "product"

    def __post_init__(self):
        if len(self.factors) == 0:
            raise GeometryInputError("a product needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def tolerance(self) -> float:  # type: ignore[override]
        return max(f.tolerance for f in self.factors)

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    @property
    def offsets(self) -> list[int]:
        out = [0]
        for f in self.factors:
            out.append(out[-1] + f.dim)
        return out

    def split(self, p):
        p = np.asarray(p, dtype=float)
        o = self.offsets
        return [p[..., o[i] : o[i + 1]] for i in range(len(self.factors))]

    def join(self, parts):
        return np.concatenate([np.asarray(x, dtype=float) for x in parts], axis=-1)

    def _validate(self, p):
        for f, part in zip(self.factors, self.split(p)):
            f.validate(part)

    def canonical(self, p):
        p = self.validate(p)
        return self.join([f.canonical(x) for f, x in zip(self.factors, self.split(p))])

    def factor_distances(self, p, q):
        p, q = self.validate(p), self.validate(q)
        return [f.distance(a, b) for f, a, b in zip(self.factors, self.split(p), self.split(q))]

    def distance(self, p, q):
        return np.sqrt(sum(d * d for d in self.factor_distances(p, q)))

    def geodesic_point(self, p, q, t):
        p, q = self.validate(p), self.validate(q)
        t = _check_t(t)
        return self.join(
            [f.geodesic_point(a, b, t) for f, a, b in zip(self.factors, self.split(p), self.split(q))]
        )

    def frechet_mean(self, points, weights, init=None):
        points = self.validate(points)
        parts = self.split(points)
        inits = self.split(init) if init is not None else [None] * len(self.factors)
        out = [None] * len(self.factors)
        # all cusp factors share one batched solve
        cusps = [k for k, f in enumerate(self.factors) if isinstance(f, CuspFactor)]
        if len(cusps) > 1:
            w = np.broadcast_to(np.asarray(weights, dtype=float), parts[cusps[0]].shape[:-1])
            stacked = np.stack([parts[k] for k in cusps])
            start = None
            if init is not None:
                start = np.stack([np.broadcast_to(inits[k], parts[k].shape[:-2] + (2,)) for k in cusps])
            means = self.factors[cusps[0]].frechet_mean(stacked, np.broadcast_to(w, stacked.shape[:-1]), init=start)
            for n, k in enumerate(cusps):
                out[k] = means[n]
        for k, (f, x, i) in enumerate(zip(self.factors, parts, inits)):
            if out[k] is None:
                out[k] = f.frechet_mean(x, weights, init=i)
        return self.join(out)

    def sample(self, rng, n, scale=1.0):
        return self.join([f.sample(rng, n, scale) for f in self.factors])

    def basepoint(self):
        return self.join([f.basepoint() for f in self.factors])

    def describe(self):
        return "product(" + ",".join(f.describe() for f in self.factors) + ")"


def geodesic_averaging_mean(space: NpcSpace, points, weights, passes: int = 400) -> np.ndarray:
    """Deterministic weighted walk toward the barycenter.

    Visits the points cyclically and moves the iterate along the geodesic
    toward the visited point by the fraction ``w_i / (running weight)``.
    Converges in every CAT(0) space, but only at rate ``O(1/k)``; it needs
    nothing but ``geodesic_point`` and serves as a slow independent reference.
    """
    points = space.validate(points)
    w = np.broadcast_to(_check_weights(weights), points.shape[:-1])
    x = points[..., 0, :]
    running = w[..., 0].copy()
    k = points.shape[-2]
    started = running > 0
    for sweep in range(passes):
        for i in range(k):
            if sweep == 0 and i == 0:
                continue
            wi = w[..., i]
            new_running = running + wi
            frac = np.where(new_running > 0, wi / np.where(new_running > 0, new_running, 1.0), 0.0)
            # before any positive weight is seen, jump straight to the point
            frac = np.where(started, frac, np.where(wi > 0, 1.0, 0.0))
            x = space.geodesic_point(x, points[..., i, :], np.clip(frac, 0.0, 1.0))
            running = new_running
            started = started | (wi > 0)
    return x
