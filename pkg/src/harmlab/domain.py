"""Equivariant domains as gain graphs, their energy, and maps between them.

An edge ``(i, j, w, g)`` contributes ``w * d(u_i, g . u_j)^2``: the value at
``j`` is carried into the frame of ``i`` by the gain ``g``.  Traversing the
edge backwards uses ``g^-1``, and since gains act by isometries both
readings give the same term.  Equivariance over a fundamental set of
vertices is encoded entirely by the gains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from harmlab.npc.spaces import GeometryInputError, NpcSpace, _check_t
from harmlab.wp.isometry import IsometryWord, apply_isometry, check_word, parse_word


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    weight: float = 1.0
    gain: IsometryWord = field(default_factory=IsometryWord.identity)
    length: float = 1.0

    def reversed(self) -> "Edge":
        return Edge(self.j, self.i, self.weight, self.gain.inverse(), self.length)


@dataclass(frozen=True)
class HalfEdge:
    """Neighbor ``other`` seen from a vertex: its value enters as ``gain . u[other]``."""

    other: int
    weight: float
    gain: IsometryWord


@dataclass(frozen=True, eq=False)
class GainGraph:
    """Finite weighted graph with isometry-word labels on its edges.

    ``shape`` and ``spacing`` are set by ``grid`` and let the mesh
    diagnostics recover the lattice layout (vertex ``(a, b)`` has index
    ``a * shape[1] + b``).
    """

    target: NpcSpace
    measures: tuple
    edges: tuple
    pinned: frozenset = frozenset()
    shape: tuple | None = None
    spacing: float | None = None
    kind: str = "custom"

    def __post_init__(self):
        measures = tuple(float(m) for m in self.measures)
        if not measures:
            raise GeometryInputError("a gain graph needs at least one vertex")
        if any(not (m > 0) for m in measures):
            raise GeometryInputError("vertex measures must be positive")
        n = len(measures)
        edges = []
        for e in self.edges:
            if not isinstance(e, Edge):
                e = Edge(*e)
            if isinstance(e.gain, str):
                e = Edge(e.i, e.j, e.weight, parse_word(e.gain), e.length)
            if not (0 <= e.i < n and 0 <= e.j < n):
                raise GeometryInputError(f"edge ({e.i}, {e.j}) refers to a missing vertex")
            if e.i == e.j:
                raise GeometryInputError("self-loops are not supported; subdivide the loop")
            if not (e.weight > 0) or not np.isfinite(e.weight):
                raise GeometryInputError("edge weights must be positive")
            if not (e.length > 0):
                raise GeometryInputError("edge lengths must be positive")
            check_word(e.gain, self.target)
            edges.append(e)
        pinned = frozenset(int(v) for v in self.pinned)
        if any(not 0 <= v < n for v in pinned):
            raise GeometryInputError("pinned vertex out of range")
        object.__setattr__(self, "measures", measures)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "pinned", pinned)
        if n > 1:
            if not edges:
                raise GeometryInputError("gain graph must be connected")
            adj = coo_matrix(
                (np.ones(len(edges)), ([e.i for e in edges], [e.j for e in edges])), shape=(n, n)
            )
            count, _ = connected_components(adj, directed=False)
            if count != 1:
                raise GeometryInputError("gain graph must be connected")

    @property
    def vertex_count(self) -> int:
        return len(self.measures)

    @cached_property
    def edge_i(self) -> np.ndarray:
        return np.array([e.i for e in self.edges], dtype=int)

    @cached_property
    def edge_j(self) -> np.ndarray:
        return np.array([e.j for e in self.edges], dtype=int)

    @cached_property
    def edge_weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.edges], dtype=float)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.edges], dtype=float)

    @cached_property
    def gain_groups(self) -> list:
        """``(word, edge indices)`` for each distinct non-identity gain."""
        groups: dict = {}
        for k, e in enumerate(self.edges):
            if not e.gain.is_identity:
                groups.setdefault(e.gain, []).append(k)
        return [(w, np.array(ix)) for w, ix in groups.items()]

    @cached_property
    def neighbors(self) -> tuple:
        out = [[] for _ in range(self.vertex_count)]
        for e in self.edges:
            out[e.i].append(HalfEdge(e.j, e.weight, e.gain))
            out[e.j].append(HalfEdge(e.i, e.weight, e.gain.inverse()))
        return tuple(tuple(x) for x in out)

    @cached_property
    def coloring(self) -> tuple:
        """Greedy proper coloring, computed once; color classes as index arrays."""
        color = np.full(self.vertex_count, -1)
        for v in range(self.vertex_count):
            used = {color[h.other] for h in self.neighbors[v]}
            c = 0
            while c in used:
                c += 1
            color[v] = c
        return tuple(np.flatnonzero(color == c) for c in range(color.max() + 1))

    @cached_property
    def padded_neighbors(self) -> tuple:
        """``(index, weight, gain masks)`` padded to the maximum degree.

        Padding slots point at the vertex itself with weight 0; ``gain masks``
        lists ``(word, bool mask)`` for the non-identity slots.
        """
        n = self.vertex_count
        width = max(1, max(len(h) for h in self.neighbors))
        idx = np.tile(np.arange(n)[:, None], (1, width))
        wts = np.zeros((n, width))
        masks: dict = {}
        for v, halves in enumerate(self.neighbors):
            for k, h in enumerate(halves):
                idx[v, k] = h.other
                wts[v, k] = h.weight
                if not h.gain.is_identity:
                    masks.setdefault(h.gain, np.zeros((n, width), dtype=bool))[v, k] = True
        return idx, wts, list(masks.items())

    @cached_property
    def generators(self) -> list:
        """Distinct non-identity edge gains, used for the displacement functional."""
        return [w for w, _ in self.gain_groups]

    def with_edges(self, edges) -> "GainGraph":
        return GainGraph(self.target, self.measures, tuple(edges), self.pinned, self.shape,
                         self.spacing, self.kind)


@dataclass(frozen=True, eq=False)
class EquivariantMap:
    """One target point per vertex, stored as a read-only ``(n, dim)`` array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise GeometryInputError("map values must be an (n_vertices, dim) array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    def replace(self, vertex: int, value) -> "EquivariantMap":
        v = self.values.copy()
        v[vertex] = value
        return EquivariantMap(v)


def as_values(graph: GainGraph, u) -> np.ndarray:
    """Validated ``(n, dim)`` array for a map or raw array."""
    vals = u.values if isinstance(u, EquivariantMap) else np.asarray(u, dtype=float)
    if vals.ndim != 2 or vals.shape[0] != graph.vertex_count:
        raise GeometryInputError(
            f"map must have one value per vertex ({graph.vertex_count}), got shape {vals.shape}"
        )
    return graph.target.validate(vals)


def carried_values(graph: GainGraph, vals: np.ndarray) -> np.ndarray:
    """``gain_e . u_{j(e)}`` for every edge ``e``; leading batch axes of
    ``vals`` (shape ``(..., n, dim)``) are kept."""
    out = vals[..., graph.edge_j, :].copy()
    for word, idx in graph.gain_groups:
        out[..., idx, :] = apply_isometry(word, out[..., idx, :], graph.target)
    return out


def stacked_energies(graph: GainGraph, vals) -> np.ndarray:
    """Energies of a stack of maps given as an array of shape ``(..., n, dim)``."""
    vals = graph.target.validate(vals)
    if vals.shape[-2] != graph.vertex_count:
        raise GeometryInputError("map stack has the wrong number of vertices")
    if not graph.edges:
        return np.zeros(vals.shape[:-2])
    d = np.asarray(graph.target.distance(vals[..., graph.edge_i, :], carried_values(graph, vals)))
    return np.sum(graph.edge_weights * d * d, axis=-1)


def edge_distances(graph: GainGraph, u) -> np.ndarray:
    vals = as_values(graph, u)
    if not graph.edges:
        return np.zeros(0)
    return np.asarray(graph.target.distance(vals[graph.edge_i], carried_values(graph, vals)))


@dataclass
class EnergyReport:
    total: float
    per_edge: np.ndarray
    lipschitz: float


def energy(graph: GainGraph, u) -> EnergyReport:
    """``E = sum_e w_e d(u_i, g_e . u_j)^2`` with each edge counted once.

    The Lipschitz proxy is ``max_e d(u_i, g_e . u_j) / length_e``.
    """
    d = edge_distances(graph, u)
    per_edge = graph.edge_weights * d * d
    lip = float(np.max(d / graph.edge_lengths)) if d.size else 0.0
    # np.sum reduces pairwise in a fixed order, so the total is bit-stable
    return EnergyReport(total=float(np.sum(per_edge)), per_edge=per_edge, lipschitz=lip)


def energy_value(graph: GainGraph, u) -> float:
    return energy(graph, u).total


def vertex_distances(graph: GainGraph, u, v) -> np.ndarray:
    return np.asarray(graph.target.distance(as_values(graph, u), as_values(graph, v)))


def d2_distance(graph: GainGraph, u, v) -> float:
    """``(sum_v mu_v d(u_v, v_v)^2)^(1/2)``."""
    d = vertex_distances(graph, u, v)
    return float(np.sqrt(np.sum(np.asarray(graph.measures) * d * d)))


def geodesic_homotopy(graph: GainGraph, u, v, t) -> EquivariantMap:
    """Vertexwise geodesic interpolation from ``u`` (``t = 0``) to ``v`` (``t = 1``)."""
    t = float(_check_t(t))
    a, b = as_values(graph, u), as_values(graph, v)
    if t == 0:
        return EquivariantMap(a)
    if t == 1:
        return EquivariantMap(b)
    return EquivariantMap(graph.target.geodesic_point(a, b, np.full(a.shape[0], t)))


def convexity_gap(graph: GainGraph, u, v, t) -> float:
    """``(1 - t) E(u) + t E(v) - E(u_t)``; nonnegative in an NPC target."""
    ut = geodesic_homotopy(graph, u, v, t)
    return (1 - t) * energy_value(graph, u) + t * energy_value(graph, v) - energy_value(graph, ut)


def gradient_term(graph: GainGraph, u, v) -> float:
    """Edge-difference form ``sum_e w_e (d(u_j, v_j) - d(u_i, v_i))^2`` of ``|grad d(u, v)|^2``."""
    d = vertex_distances(graph, u, v)
    diff = d[graph.edge_j] - d[graph.edge_i]
    return float(np.sum(graph.edge_weights * diff * diff))


def convexity_deficit(graph: GainGraph, u, v, t) -> float:
    """Normalized convexity gap minus the gradient term; nonnegative in an NPC target."""
    t = float(t)
    if not 0 < t < 1:
        raise GeometryInputError("convexity_deficit needs t strictly between 0 and 1")
    return convexity_gap(graph, u, v, t) / (t * (1 - t)) - gradient_term(graph, u, v)


def stacked_convexity(graph: GainGraph, u_stack, v_stack, ts) -> tuple[np.ndarray, np.ndarray]:
    """Convexity gaps and deficits for a stack of map pairs.

    ``u_stack`` and ``v_stack`` have shape ``(pairs, n, dim)``.  Returns two
    ``(len(ts), pairs)`` arrays: ``E(u_t) - (1 - t) E(u) - t E(v)`` (which
    should be nonpositive) and the deficit of ``convexity_deficit``.
    """
    target = graph.target
    u_stack, v_stack = target.validate(u_stack), target.validate(v_stack)
    eu, ev = stacked_energies(graph, u_stack), stacked_energies(graph, v_stack)
    d = np.asarray(target.distance(u_stack, v_stack))
    diff = d[..., graph.edge_j] - d[..., graph.edge_i]
    grad = np.sum(graph.edge_weights * diff * diff, axis=-1)
    excess, deficit = [], []
    for t in ts:
        t = float(t)
        if not 0 < t < 1:
            raise GeometryInputError("convexity parameters must lie strictly between 0 and 1")
        mid = target.geodesic_point(u_stack, v_stack, np.full(u_stack.shape[:-1], t))
        gap = (1 - t) * eu + t * ev - stacked_energies(graph, mid)
        excess.append(-gap)
        deficit.append(gap / (t * (1 - t)) - grad)
    return np.array(excess), np.array(deficit)


def random_map(graph: GainGraph, rng: np.random.Generator, scale: float = 1.0) -> EquivariantMap:
    return EquivariantMap(graph.target.sample(rng, graph.vertex_count, scale))


def constant_map(graph: GainGraph, point) -> EquivariantMap:
    p = graph.target.validate(point)
    return EquivariantMap(np.broadcast_to(p, (graph.vertex_count, p.shape[-1])))


# graph builders -------------------------------------------------------------


def cycle(n: int, target: NpcSpace, gain: IsometryWord | str | None = None, weight: float = 1.0,
          pinned=()) -> GainGraph:
    """``n``-cycle; the closing edge ``(n - 1, 0)`` carries ``gain``."""
    if n < 3:
        raise GeometryInputError("a cycle needs at least 3 vertices")
    word = _word(gain)
    edges = [Edge(k, k + 1, weight) for k in range(n - 1)]
    edges.append(Edge(n - 1, 0, weight, word))
    return GainGraph(target, (1.0,) * n, tuple(edges), frozenset(pinned), kind="cycle")


def path(n: int, target: NpcSpace, weight: float = 1.0, pinned=()) -> GainGraph:
    if n < 1:
        raise GeometryInputError("a path needs at least 1 vertex")
    edges = tuple(Edge(k, k + 1, weight) for k in range(n - 1))
    return GainGraph(target, (1.0,) * n, edges, frozenset(pinned), kind="path")


def bouquet(loop_length: int, target: NpcSpace, gains, weight: float = 1.0, pinned=()) -> GainGraph:
    """Cycles of ``loop_length`` vertices sharing vertex 0, one per gain.

    Loop ``k`` runs ``0 -> a_1 -> ... -> a_{m-1}`` and closes with the edge
    ``(a_{m-1}, 0)`` labelled by ``gains[k]``.
    """
    if loop_length < 3:
        raise GeometryInputError("each loop needs at least 3 vertices")
    gains = [_word(g) for g in gains]
    if not gains:
        raise GeometryInputError("a bouquet needs at least one loop")
    edges = []
    nxt = 1
    for word in gains:
        chain = [0] + list(range(nxt, nxt + loop_length - 1))
        nxt += loop_length - 1
        edges += [Edge(a, b, weight) for a, b in zip(chain[:-1], chain[1:])]
        edges.append(Edge(chain[-1], 0, weight, word))
    return GainGraph(target, (1.0,) * nxt, tuple(edges), frozenset(pinned), kind="bouquet")


def grid(nx: int, ny: int, target: NpcSpace, spacing: float | None = None,
         pin_boundary: bool = True) -> GainGraph:
    """``nx`` by ``ny`` lattice on the unit square (spacing ``1 / (nx - 1)`` by default).

    Unit weights make the graph energy the five-point discretization of the
    Dirichlet energy in two dimensions; measures are ``h^2``.
    """
    if nx < 2 or ny < 2:
        raise GeometryInputError("a grid needs at least 2 vertices per side")
    h = float(spacing) if spacing is not None else 1.0 / (nx - 1)
    edges = []
    for a in range(nx):
        for b in range(ny):
            v = a * ny + b
            if a + 1 < nx:
                edges.append(Edge(v, v + ny, 1.0, length=h))
            if b + 1 < ny:
                edges.append(Edge(v, v + 1, 1.0, length=h))
    pinned = set()
    if pin_boundary:
        for a in range(nx):
            for b in range(ny):
                if a in (0, nx - 1) or b in (0, ny - 1):
                    pinned.add(a * ny + b)
    return GainGraph(target, (h * h,) * (nx * ny), tuple(edges), frozenset(pinned), (nx, ny), h,
                     kind="grid")


def grid_coordinates(graph: GainGraph) -> np.ndarray:
    """Physical ``(x, y)`` of each grid vertex."""
    if graph.shape is None:
        raise GeometryInputError("graph has no lattice layout")
    nx, ny = graph.shape
    a, b = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    return np.stack([a.ravel(), b.ravel()], -1) * graph.spacing


def _word(gain) -> IsometryWord:
    if gain is None:
        return IsometryWord.identity()
    if isinstance(gain, str):
        return parse_word(gain)
    return gain
