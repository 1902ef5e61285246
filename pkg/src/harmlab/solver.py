"""Energy minimization by vertexwise Fréchet-mean relaxation, with diagnostics.

Each relaxation step replaces a vertex value by the weighted Fréchet mean
of its gain-carried neighbors, which minimizes the energy in that vertex
with the others frozen.  Targets with cusp factors additionally get a
stratum line search: the geodesic homotopy that contracts one cusp factor
of every free vertex toward the cusp point.  Relaxation alone approaches a
stratum only polynomially slowly, because the twist direction degenerates
like ``u^3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from harmlab.domain import (
    EquivariantMap,
    GainGraph,
    as_values,
    carried_values,
    d2_distance,
    energy_value,
    grid_coordinates,
    random_map,
)
from harmlab.npc.spaces import CuspFactor, Euclidean, GeometryInputError, HyperbolicPlane, Product
from harmlab.wp import cusp
from harmlab.wp.delta import delta_functional
from harmlab.wp.isometry import apply_isometry
from harmlab.wp.metric import ChartDegenerateError, ModelMetric, factor_christoffel
from harmlab.wp.strata import cusp_factor_slots

CONVERGED = "converged"
MAX_SWEEPS = "max_sweeps"
STALLED = "stalled"

ORDERS = ("random", "colored", "sequential")
COLLAPSE_THRESHOLD = 1e-6
TRACE_COLUMNS = ("sweep", "energy", "max_move", "min_u", "delta_max")


@dataclass(frozen=True)
class Schedule:
    """Sweep order and stopping rule.

    ``tol_energy = None`` means ``1e-10 * E(init)``.  ``order`` is one of
    ``random`` (seeded permutation, reshuffled every sweep), ``colored``
    (color classes updated from a frozen snapshot) or ``sequential``.

    ``omega > 1`` over-relaxes: a vertex moves to the point at parameter
    ``omega`` on the geodesic from its old value through the mean, when
    that point exists and lowers the local energy, and to the mean
    otherwise.  Lattice problems need far fewer sweeps with ``omega``
    near ``2 / (1 + sin(pi h))``.
    """

    order: str = "random"
    max_sweeps: int = 100_000
    tol_energy: float | None = None
    tol_move: float = 1e-8
    stratum_search: bool = True
    stall_sweeps: int = 50
    omega: float = 1.0

    def __post_init__(self):
        if self.order not in ORDERS:
            raise GeometryInputError(f"sweep order must be one of {ORDERS}")
        if self.max_sweeps < 0:
            raise GeometryInputError("max_sweeps must be nonnegative")
        if not 1.0 <= self.omega < 2.0:
            raise GeometryInputError("omega must lie in [1, 2)")


@dataclass
class SolveTrace:
    """Per-sweep records; row 0 describes the initial map."""

    rows: list = field(default_factory=list)
    termination: str = ""
    collapsed: bool = False
    line_search_steps: int = 0

    @property
    def energies(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def sweeps(self) -> int:
        return self.rows[-1][0] if self.rows else 0

    @property
    def final_energy(self) -> float:
        return self.rows[-1][1]

    def column(self, name: str) -> np.ndarray:
        return np.array([r[TRACE_COLUMNS.index(name)] for r in self.rows])


def _gather(graph: GainGraph, vals: np.ndarray, verts: np.ndarray):
    idx, wts, masks = graph.padded_neighbors
    pts = vals[idx[verts]]
    for word, mask in masks:
        m = mask[verts]
        if m.any():
            pts[m] = apply_isometry(word, pts[m], graph.target)
    return pts, wts[verts]


def _local_objective(graph, x, pts, w):
    d = graph.target.distance(x[:, None, :], pts)
    return np.sum(w * d * d, axis=-1)


def _extend(factor, p, q, t):
    if isinstance(factor, Euclidean):
        return p + t * (q - p)
    if isinstance(factor, HyperbolicPlane):
        return factor.exp(p, t * factor.log(p, q))
    return cusp.geodesic_point(p, q, t)


def _extrapolate(target, old, mean, omega):
    """Point at parameter ``omega`` on the geodesic from ``old`` through ``mean``;
    rows where that point leaves the space fall back to ``mean``."""
    factors = target.factors if isinstance(target, Product) else (target,)
    if not all(isinstance(f, (Euclidean, HyperbolicPlane, CuspFactor)) for f in factors):
        return mean
    olds = target.split(old) if isinstance(target, Product) else [old]
    means = target.split(mean) if isinstance(target, Product) else [mean]
    ok = np.ones(old.shape[0], dtype=bool)
    parts = []
    with np.errstate(all="ignore"):
        for f, a, b in zip(factors, olds, means):
            if isinstance(f, CuspFactor):
                # geodesics cannot be continued through the cusp point
                ok &= (a[:, 0] > 0) & (b[:, 0] > 0)
                a = np.where(ok[:, None], a, [1.0, 0.0])
                b = np.where(ok[:, None], b, [1.0, 0.0])
                part = _extend(f, a, b, omega)
                ok &= part[:, 0] > 0
            else:
                part = _extend(f, a, b, omega)
            parts.append(part)
    out = target.join(parts) if isinstance(target, Product) else parts[0]
    ok &= np.all(np.isfinite(out), axis=-1)
    return np.where(ok[:, None], out, mean)


def _relax_batch(graph: GainGraph, vals: np.ndarray, verts: np.ndarray,
                 omega: float = 1.0) -> np.ndarray:
    """New values for ``verts`` computed from ``vals``; returns per-vertex movement."""
    free = np.array([v for v in verts if v not in graph.pinned and graph.neighbors[v]], dtype=int)
    moves = np.zeros(len(verts))
    if free.size == 0:
        return moves
    pts, w = _gather(graph, vals, free)
    old = vals[free]
    new = graph.target.frechet_mean(pts, w, init=old)
    # numerical means are accepted only if they do not raise the local energy
    f_old = _local_objective(graph, old, pts, w)
    worse = _local_objective(graph, new, pts, w) > f_old
    new[worse] = old[worse]
    if omega != 1.0:
        over = _extrapolate(graph.target, old, new, omega)
        good = _local_objective(graph, over, pts, w) <= f_old
        new[good] = over[good]
    vals[free] = new
    move = np.asarray(graph.target.distance(old, new))
    pos = {v: k for k, v in enumerate(verts)}
    for k, v in enumerate(free):
        moves[pos[v]] = move[k]
    return moves


def relax_vertex(graph: GainGraph, u, vertex: int) -> EquivariantMap:
    """Replace one vertex value by the Fréchet mean of its carried neighbors.

    Pinned and isolated vertices are left unchanged.
    """
    vals = as_values(graph, u).copy()
    if not 0 <= vertex < graph.vertex_count:
        raise GeometryInputError("vertex out of range")
    _relax_batch(graph, vals, np.array([vertex]))
    return EquivariantMap(vals)


def _sweep(graph: GainGraph, vals: np.ndarray, order: str, rng: np.random.Generator,
           omega: float = 1.0) -> float:
    n = graph.vertex_count
    if order == "colored":
        moves = [_relax_batch(graph, vals, cls, omega) for cls in graph.coloring]
        return float(max(m.max(initial=0.0) for m in moves))
    seq = rng.permutation(n) if order == "random" else np.arange(n)
    best = 0.0
    for v in seq:
        best = max(best, float(_relax_batch(graph, vals, np.array([v]), omega)[0]))
    return best


def _contract(graph, vals, slot, free, t):
    out = vals.copy()
    if t >= 1.0:
        out[free, slot] = 0.0
        out[free, slot + 1] = np.nan
    else:
        out[free, slot] = (1.0 - t) * vals[free, slot]
    return out


def stratum_line_search(graph: GainGraph, vals: np.ndarray, energy_now: float):
    """Try contracting each cusp factor of all free vertices toward the cusp point.

    The contraction ``u -> (1 - t) u`` is the geodesic homotopy to the map
    with that factor pinched, so the energy is convex in ``t``; a golden
    section search plus the endpoint ``t = 1`` finds the best ``t``.
    Returns ``(values, energy, steps_taken)``.
    """
    slots = cusp_factor_slots(graph.target, vals.shape[1])
    free = np.array([v for v in range(graph.vertex_count) if v not in graph.pinned], dtype=int)
    steps = 0
    if not slots or free.size == 0:
        return vals, energy_now, steps
    for slot in slots:
        if not np.any(vals[free, slot] > 0):
            continue

        def phi(t, slot=slot):
            return energy_value(graph, _contract(graph, vals, slot, free, t))

        e1 = phi(1.0)
        probe = phi(1e-2)
        if e1 >= energy_now and probe >= energy_now:
            continue
        a, b = 0.0, 1.0
        g = (math.sqrt(5) - 1) / 2
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = phi(c), phi(d)
        for _ in range(40):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = phi(c)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = phi(d)
        candidates = [(e1, 1.0), (fc, c), (fd, d), (probe, 1e-2)]
        best_e, best_t = min(candidates)
        if best_e < energy_now:
            vals = _contract(graph, vals, slot, free, best_t)
            energy_now = best_e
            steps += 1
    return vals, energy_now, steps


def _min_u(graph: GainGraph, vals: np.ndarray) -> float:
    slots = cusp_factor_slots(graph.target, vals.shape[1])
    if not slots:
        return float("nan")
    return float(vals[:, slots].min())


def _delta_max(graph: GainGraph, vals: np.ndarray) -> float:
    gens = graph.generators
    if not gens:
        return 0.0
    return float(np.max(delta_functional(vals, gens, graph.target)))


def minimize(graph: GainGraph, init, schedule: Schedule | None = None, seed: int = 0):
    """Relaxation sweeps until the energy and the vertex movement both stall.

    Returns ``(map, trace)``.  The run is deterministic in
    ``(graph, init, schedule, seed)``.
    """
    schedule = schedule or Schedule()
    rng = np.random.default_rng(seed)
    vals = as_values(graph, init).copy()
    e = energy_value(graph, vals)
    tol_e = schedule.tol_energy if schedule.tol_energy is not None else 1e-10 * e
    trace = SolveTrace()
    trace.rows.append((0, e, 0.0, _min_u(graph, vals), _delta_max(graph, vals)))
    search = schedule.stratum_search and bool(cusp_factor_slots(graph.target, vals.shape[1]))
    idle = 0
    trace.termination = MAX_SWEEPS
    for sweep in range(1, schedule.max_sweeps + 1):
        before = vals.copy()
        move = _sweep(graph, vals, schedule.order, rng, schedule.omega)
        e_new = energy_value(graph, vals)
        if search:
            vals, e_new, steps = stratum_line_search(graph, vals, e_new)
            if steps:
                trace.line_search_steps += steps
                move = max(move, float(np.max(graph.target.distance(before, vals))))
        if e_new > e:
            # rounding in the means can lift the energy by a few ulps; keep the old map
            vals = before
            e_new = e
        min_u = _min_u(graph, vals)
        if min_u < COLLAPSE_THRESHOLD:
            trace.collapsed = True
        trace.rows.append((sweep, e_new, move, min_u, _delta_max(graph, vals)))
        decrease = e - e_new
        e = e_new
        if decrease <= tol_e and move < schedule.tol_move:
            trace.termination = CONVERGED
            break
        idle = idle + 1 if decrease <= 0 else 0
        if idle >= schedule.stall_sweeps:
            trace.termination = STALLED
            break
    return EquivariantMap(vals), trace


# chart diagnostics on lattice domains ----------------------------------------


def _chart_setup(graph: GainGraph, metric: ModelMetric | None):
    if graph.shape is None or graph.spacing is None:
        raise GeometryInputError("mesh diagnostics need a grid graph")
    target = graph.target
    if isinstance(target, Euclidean):
        if metric is not None:
            raise GeometryInputError("a Euclidean target has no model metric")
        return None
    factors = target.factors if isinstance(target, Product) else (target,)
    if not all(isinstance(f, CuspFactor) for f in factors):
        raise GeometryInputError("chart diagnostics need a Euclidean target or cusp factors only")
    if metric is None:
        metric = ModelMetric.leading_order(max(2, (len(factors) + 5) // 3))
    if metric.curves < len(factors):
        raise GeometryInputError(
            f"metric has {metric.curves} curves but the target has {len(factors)} cusp factors"
        )
    return metric


def _lattice(graph: GainGraph, u) -> np.ndarray:
    vals = as_values(graph, u)
    nx, ny = graph.shape
    return vals.reshape(nx, ny, -1)


def _laplacian(x: np.ndarray, h: float) -> np.ndarray:
    return (x[2:, 1:-1] + x[:-2, 1:-1] + x[1:-1, 2:] + x[1:-1, :-2] - 4 * x[1:-1, 1:-1]) / (h * h)


def _check_chart(x: np.ndarray, u_floor: float):
    u = x[..., 0::2]
    if np.any(~(u >= u_floor)):
        raise ChartDegenerateError(
            f"image reaches u = {np.nanmin(u):.3g} below the chart threshold {u_floor:g}; "
            "use metric-space diagnostics instead"
        )


def pde_residual(graph: GainGraph, u, metric: ModelMetric | None = None, component: int = 0,
                 u_floor: float = 1e-2) -> np.ndarray:
    """Residual of the harmonic map equation for one chart coordinate.

    ``Lap_h x^k + Gamma^k_ab(x) (dx x^a dx x^b + dy x^a dy x^b)`` with the
    five-point Laplacian and central first differences, on interior lattice
    vertices (shape ``(nx - 2, ny - 2)``).  ``component = 0`` is the first
    cusp radius ``u^1``.
    """
    metric = _chart_setup(graph, metric)
    x = _lattice(graph, u)
    h = graph.spacing
    lap = _laplacian(x[..., component], h)
    if metric is None:
        return lap
    _check_chart(x, u_floor)
    gx = (x[2:, 1:-1] - x[:-2, 1:-1]) / (2 * h)
    gy = (x[1:-1, 2:] - x[1:-1, :-2]) / (2 * h)
    # factors are orthogonal, so only the block holding the component contributes
    k = 2 * (component // 2)
    gam = factor_christoffel(metric, x[1:-1, 1:-1, k])[..., component - k, :, :]
    gx, gy = gx[..., k:k + 2], gy[..., k:k + 2]
    quad = np.einsum("...ab,...a,...b->...", gam, gx, gx) + np.einsum("...ab,...a,...b->...", gam, gy, gy)
    return lap + quad


@dataclass
class SubsolutionReport:
    constant: float
    margins: np.ndarray
    fraction_satisfied: float
    laplacian: np.ndarray
    values: np.ndarray


def subsolution_check(graph: GainGraph, u, metric: ModelMetric | None = None, tol: float = 1e-10,
                      constant: float | None = None, u_floor: float = 1e-3) -> SubsolutionReport:
    """Fit the smallest ``C >= 0`` with ``Lap_h u^1 <= C u^1 + tol`` on interior vertices.

    Passing ``constant`` skips the fit and reports margins for that ``C``.
    """
    metric = _chart_setup(graph, metric)
    x = _lattice(graph, u)
    if metric is not None:
        _check_chart(x, u_floor)
    lap = _laplacian(x[..., 0], graph.spacing)
    val = x[1:-1, 1:-1, 0]
    if constant is None:
        if metric is None and np.any(val <= 0):
            # a flat coordinate may change sign; fit where it is positive
            ratio = np.where(val > 0, (lap - tol) / np.where(val > 0, val, 1.0), 0.0)
        else:
            ratio = (lap - tol) / val
        constant = float(max(0.0, np.max(ratio, initial=0.0)))
    margins = constant * val - lap
    frac = float(np.mean(margins >= -tol)) if margins.size else 1.0
    return SubsolutionReport(constant, margins, frac, lap, val)


def prolong(coarse: GainGraph, u, fine: GainGraph) -> EquivariantMap:
    """Initial guess on a refined lattice: coarse values at shared vertices,
    geodesic midpoints on the new ones, pinned fine values kept."""
    cx = _lattice(coarse, u)
    nx, ny = fine.shape
    if (nx - 1) != 2 * (coarse.shape[0] - 1) or (ny - 1) != 2 * (coarse.shape[1] - 1):
        raise GeometryInputError("fine grid must halve the coarse spacing")
    target = fine.target
    out = np.empty((nx, ny, cx.shape[-1]))
    out[0::2, 0::2] = cx
    out[1::2, 0::2] = target.midpoint(cx[:-1], cx[1:])
    out[0::2, 1::2] = target.midpoint(cx[:, :-1], cx[:, 1:])
    out[1::2, 1::2] = target.midpoint(out[1::2, 0:-1:2], out[1::2, 2::2])
    return EquivariantMap(out.reshape(nx * ny, -1))


def boundary_map(graph: GainGraph, func) -> EquivariantMap:
    """Map whose value at lattice point ``(x, y)`` is ``func(x, y)``."""
    xy = grid_coordinates(graph)
    return EquivariantMap(graph.target.canonical(func(xy[:, 0], xy[:, 1])))


def with_pinned(graph: GainGraph, u, base) -> EquivariantMap:
    """``u`` with the pinned vertices reset to their values in ``base``."""
    vals = as_values(graph, u).copy()
    pins = sorted(graph.pinned)
    if pins:
        vals[pins] = as_values(graph, base)[pins]
    return EquivariantMap(vals)


# empirical uniqueness ---------------------------------------------------------


def image_points(graph: GainGraph, u) -> np.ndarray:
    """Vertex values together with the gain-carried endpoint of every edge."""
    vals = as_values(graph, u)
    if not graph.edges:
        return vals
    return np.concatenate([vals, carried_values(graph, vals)], axis=0)


def distance_to_segment(space, p, q, x, iters: int = 80) -> float:
    """``min_t d(x, gamma_pq(t))`` by golden section; the function is convex in CAT(0)."""
    g = (math.sqrt(5) - 1) / 2
    a, b = 0.0, 1.0

    def f(t):
        return float(space.distance(x, space.geodesic_point(p, q, t)))

    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return min(fc, fd, f(0.0), f(1.0))


def image_geometry(graph: GainGraph, u, tol: float = 1e-6) -> tuple[bool, bool, float]:
    """``(is_constant, lies_on_geodesic, geodesic_gap)`` for the equivariant image."""
    space = graph.target
    pts = image_points(graph, u)
    dmat = np.asarray(space.distance(pts[:, None, :], pts[None, :, :]))
    diameter = float(dmat.max())
    if diameter <= tol:
        return True, True, 0.0
    a, b = np.unravel_index(int(np.argmax(dmat)), dmat.shape)
    gap = 0.0
    for k in range(pts.shape[0]):
        if k in (a, b):
            continue
        gap = max(gap, distance_to_segment(space, pts[a], pts[b], pts[k]))
        if gap > tol:
            break
    return False, gap <= tol, gap


@dataclass
class UniquenessReport:
    max_pairwise_d2: float
    energies: list
    seeds: list
    on_geodesic: bool
    constant: bool
    geodesic_gap: float
    terminations: list
    minimizers: list = field(repr=False, default_factory=list)

    @property
    def degenerate(self) -> bool:
        """Cases where uniqueness is not claimed: constant or geodesic images."""
        return self.on_geodesic or self.constant


def uniqueness_test(graph: GainGraph, seeds, schedule: Schedule | None = None, base=None,
                    scale: float = 1.0) -> UniquenessReport:
    """Minimize from one random initial map per seed and compare the results.

    Pinned vertices take their values from ``base``.  The report flags
    constant and geodesic images; uniqueness is only meaningful otherwise.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise GeometryInputError("uniqueness_test needs at least two seeds")
    if graph.pinned and base is None:
        raise GeometryInputError("pinned vertices need a base map")
    maps, energies, terms = [], [], []
    for s in seeds:
        init = random_map(graph, np.random.default_rng(s), scale)
        if base is not None:
            init = with_pinned(graph, init, base)
        out, trace = minimize(graph, init, schedule, seed=s)
        maps.append(out)
        energies.append(trace.final_energy)
        terms.append(trace.termination)
    worst = 0.0
    for i in range(len(maps)):
        for j in range(i + 1, len(maps)):
            worst = max(worst, d2_distance(graph, maps[i], maps[j]))
    best = int(np.argmin(energies))
    constant, on_geo, gap = image_geometry(graph, maps[best])
    return UniquenessReport(worst, energies, seeds, on_geo, constant, gap, terms, maps)
