"""Curve systems, stratified points of the model target, and stratum bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from harmlab.npc.spaces import CuspFactor, GeometryInputError, NpcSpace, Product


@dataclass(frozen=True, order=True)
class CurveSystem:
    """Pinched curve indices naming the boundary stratum ``T_C``.

    The empty system is the interior stratum; with all ``3g - 3`` curves
    pinched the stratum is a single point.
    """

    genus: int
    pinched: tuple = ()

    def __post_init__(self):
        if int(self.genus) != self.genus or self.genus < 2:
            raise GeometryInputError("genus must be >= 2")
        pinched = tuple(sorted(int(i) for i in self.pinched))
        if len(set(pinched)) != len(pinched):
            raise GeometryInputError("pinched curve indices must be distinct")
        if any(i < 1 or i > self.max_curves for i in pinched):
            raise GeometryInputError(f"curve indices must lie in 1..{self.max_curves}")
        object.__setattr__(self, "pinched", pinched)

    @property
    def max_curves(self) -> int:
        return 3 * self.genus - 3

    @property
    def is_interior(self) -> bool:
        return not self.pinched

    @property
    def is_maximal(self) -> bool:
        return len(self.pinched) == self.max_curves

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.pinched) + "}"


def model_target(genus: int = 2, extra=()) -> Product:
    """``Product`` of ``3g - 3`` cusp factors, optionally followed by ``extra`` factors."""
    if int(genus) != genus or genus < 2:
        raise GeometryInputError("genus must be >= 2")
    return Product(tuple(CuspFactor() for _ in range(3 * genus - 3)) + tuple(extra))


def stratified_point(u, theta=None) -> np.ndarray:
    """Coordinates ``[u_1, theta_1, ...]``; twists at pinched factors become nan."""
    u = np.asarray(u, dtype=float)
    theta = np.zeros_like(u) if theta is None else np.asarray(theta, dtype=float)
    u, theta = np.broadcast_arrays(u, theta)
    out = np.empty(u.shape[:-1] + (2 * u.shape[-1],))
    out[..., 0::2] = u
    out[..., 1::2] = np.where(u == 0, np.nan, theta)
    return out


def cusp_factor_slots(space: NpcSpace | None, width: int) -> list[int]:
    """Coordinate offsets of the ``u`` entry of each cusp factor, in curve order."""
    if space is None:
        if width % 2:
            raise GeometryInputError("a stratified point has an even number of coordinates")
        return list(range(0, width, 2))
    if isinstance(space, CuspFactor):
        return [0]
    if isinstance(space, Product):
        offs = space.offsets
        return [offs[i] for i, f in enumerate(space.factors) if isinstance(f, CuspFactor)]
    return []


def _genus_for(curves: int) -> int:
    # smallest genus with at least `curves` pinching curves
    return max(2, (curves + 5) // 3)


def stratum_of(point, space: NpcSpace | None = None, genus: int | None = None) -> CurveSystem:
    """Curves whose radius is exactly zero.  No snapping is applied."""
    point = np.asarray(point, dtype=float)
    slots = cusp_factor_slots(space, point.shape[-1])
    g = genus if genus is not None else _genus_for(len(slots))
    pinched = tuple(i + 1 for i, s in enumerate(slots) if point[s] == 0)
    return CurveSystem(g, pinched)


def snap(point, space: NpcSpace | None = None, threshold: float = 1e-12) -> np.ndarray:
    """Set radii below ``threshold`` to zero.  Only used on explicit request."""
    point = np.array(point, dtype=float)
    for s in cusp_factor_slots(space, point.shape[-1]):
        small = point[..., s] < threshold
        point[..., s] = np.where(small, 0.0, point[..., s])
        point[..., s + 1] = np.where(small, np.nan, point[..., s + 1])
    return point


def geodesic_stratum_trace(space: NpcSpace, p, q, sample_count: int = 32, genus: int | None = None):
    """Strata of the geodesic ``pq`` at ``sample_count`` interior parameters.

    Returns ``(ts, strata, radii)`` where ``radii[k]`` holds the cusp radii at
    ``ts[k]``; the open segment is expected to sit in a single stratum.
    """
    ts = np.arange(1, sample_count + 1) / (sample_count + 1)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pts = space.geodesic_point(np.broadcast_to(p, ts.shape + p.shape), np.broadcast_to(q, ts.shape + q.shape), ts)
    slots = cusp_factor_slots(space, p.shape[-1])
    strata = [stratum_of(x, space, genus) for x in pts]
    radii = pts[:, slots] if slots else np.zeros((ts.size, 0))
    return ts, strata, radii
