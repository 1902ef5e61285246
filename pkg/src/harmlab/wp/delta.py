"""Maximal displacement functional and a sampling probe for properness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from harmlab.npc.spaces import GeometryInputError, NpcSpace
from harmlab.wp.isometry import IsometryWord, apply_isometry

BOUNDED = "bounded_within_radius"
ESCAPED = "escaped"


def delta_functional(point, generators, space: NpcSpace) -> np.ndarray:
    """``max_i d(x, g_i x)`` over the generator list (broadcasts over points)."""
    generators = list(generators)
    if not generators:
        raise GeometryInputError("delta needs at least one generator")
    point = space.validate(point)
    values = [space.distance(point, apply_isometry(g, point, space)) for g in generators]
    return np.max(np.stack(values, axis=0), axis=0)


@dataclass
class ProbeReport:
    """Outcome of the randomized sublevel-set search.

    ``sublevel_bounded`` is evidence gathered by sampling, not a proof.
    """

    level: float
    search_radius: float
    sublevel_bounded: str
    delta_values: list = field(default_factory=list)
    shell_scales: list = field(default_factory=list)
    farthest_sublevel_distance: float = 0.0
    witness: list | None = None
    samples: int = 0
    seed: int = 0
    note: str = "heuristic: randomized sampling evidence, not a proof of (un)boundedness"

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "search_radius": self.search_radius,
            "verdict": self.sublevel_bounded,
            "min_delta_per_shell": self.delta_values,
            "shell_scales": self.shell_scales,
            "farthest_sublevel_distance": self.farthest_sublevel_distance,
            "witness": self.witness,
            "samples": self.samples,
            "seed": self.seed,
            "note": self.note,
        }


def properness_probe(
    generators,
    level: float,
    search_radius: float,
    samples: int,
    seed: int,
    space: NpcSpace,
    basepoint=None,
    shells: int = 6,
) -> ProbeReport:
    """Search for points with ``delta < level`` farther than ``search_radius``.

    Sampling scales double from ``search_radius / 4``; each shell draws
    ``samples`` points from ``space.sample``.  Any sublevel point beyond the
    radius gives the verdict ``escaped``.
    """
    if not level > 0:
        raise GeometryInputError("level must be positive")
    generators = [g if isinstance(g, IsometryWord) else IsometryWord(g) for g in generators]
    rng = np.random.default_rng(seed)
    base = space.basepoint() if basepoint is None else space.validate(basepoint)
    scales = [search_radius * 2.0 ** (k - 2) for k in range(shells)]
    farthest = 0.0
    witness = None
    mins = []
    for scale in scales:
        pts = space.sample(rng, samples, scale)
        delta = delta_functional(pts, generators, space)
        mins.append(float(delta.min()))
        inside = delta < level
        if inside.any():
            dist = space.distance(base, pts[inside])
            k = int(np.argmax(dist))
            if dist[k] > farthest:
                farthest = float(dist[k])
                witness = pts[inside][k].tolist()
    verdict = ESCAPED if farthest > search_radius else BOUNDED
    return ProbeReport(
        level=float(level),
        search_radius=float(search_radius),
        sublevel_bounded=verdict,
        delta_values=mins,
        shell_scales=scales,
        farthest_sublevel_distance=farthest,
        witness=witness,
        samples=samples,
        seed=seed,
    )
