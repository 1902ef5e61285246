"""The scripted scenarios behind ``harmlab run``.

Each scenario turns a ``ScenarioConfig`` into verdicts (one per check, each
carrying the measured number and its threshold) plus CSV tables, and
``run_scenario`` writes them together with a JSON report.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from harmlab.domain import as_values, bouquet, cycle, grid, path, random_map, stacked_convexity
from harmlab.experiments.config import ScenarioConfig, parse_target
from harmlab.experiments.output import Table, emit_csv, write_json
from harmlab.experiments.problems import NearStratumData, ProfileHarmonicMap, refinement_study
from harmlab.npc.ops import audit_space
from harmlab.npc.spaces import CuspFactor, Euclidean, NpcSpace, Product
from harmlab.solver import Schedule, minimize, uniqueness_test
from harmlab.wp import cusp
from harmlab.wp.delta import properness_probe
from harmlab.wp.isometry import parse_word
from harmlab.wp.metric import (
    ModelMetric,
    christoffel,
    christoffel_fd,
    gauss_curvature_factor,
    loglog_slope,
    order_exponents,
)
from harmlab.wp.paths import grid_distance
from harmlab.wp.strata import cusp_factor_slots, geodesic_stratum_trace, model_target

PASS = "pass"
FAIL = "fail"
DEGENERATE = "degenerate-flagged"

EXIT_CODES = {PASS: 0, FAIL: 2, DEGENERATE: 3}
EXIT_CONFIG = 1
EXIT_IO = 4

HALF_TURN = repr(math.pi / 2)
CONVEXITY_TS = tuple(k / 10 for k in range(1, 10))


@dataclass
class Verdict:
    """Outcome of one check; ``measured`` is compared against ``threshold``."""

    check: str
    status: str
    measured: float | str
    threshold: float | str
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"check": self.check, "status": self.status, "measured": self.measured,
                "threshold": self.threshold, "detail": self.detail}


def _at_most(check, measured, limit, **detail) -> Verdict:
    measured = float(measured)
    return Verdict(check, PASS if measured <= limit else FAIL, measured, f"<= {limit!r}", detail)


def _at_least(check, measured, limit, **detail) -> Verdict:
    measured = float(measured)
    return Verdict(check, PASS if measured >= limit else FAIL, measured, f">= {limit!r}", detail)


def _near(check, measured, target, tol, **detail) -> Verdict:
    measured = float(measured)
    ok = abs(measured - target) <= tol
    return Verdict(check, PASS if ok else FAIL, measured, f"{target!r} +- {tol!r}", detail)


@dataclass
class ScenarioReport:
    scenario: str
    verdicts: list
    csv_paths: list
    config_hash: str
    elapsed_seconds: float | None = None
    seed: int = 0

    @property
    def status(self) -> str:
        states = {v.status for v in self.verdicts}
        if FAIL in states or not states:
            return FAIL
        if DEGENERATE in states:
            return DEGENERATE
        return PASS

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def as_dict(self, timestamp: bool = True) -> dict:
        return {
            "scenario": self.scenario,
            "status": self.status,
            "seed": self.seed,
            "verdicts": [v.as_dict() for v in self.verdicts],
            "csv": list(self.csv_paths),
            "config_hash": self.config_hash,
            "elapsed_seconds": self.elapsed_seconds if timestamp else None,
        }

    def verdict_table(self) -> Table:
        table = Table(("check", "status", "measured", "threshold"))
        for v in self.verdicts:
            table.add(v.check, v.status, v.measured, v.threshold)
        return table


@dataclass
class _Outcome:
    verdicts: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)


# shared helpers ------------------------------------------------------------------


def _target(config: ScenarioConfig, default: str) -> NpcSpace:
    return parse_target(config.get("target", "spec") or default, config.genus)


def _gains(config: ScenarioConfig, default):
    return list(config.get("graph", "gains") or default)


def _schedule(config: ScenarioConfig) -> Schedule:
    return Schedule(
        order=config.get("solver", "order") or "random",
        max_sweeps=config.get("solver", "max_sweeps"),
        tol_energy=config.get("solver", "tol_energy"),
        tol_move=config.get("solver", "tol_move"),
        stratum_search=config.get("solver", "stratum_search"),
        omega=config.get("solver", "omega"),
    )


def _build_graph(config: ScenarioConfig, target, kind: str, size: int, gains):
    kind = config.get("graph", "kind") or kind
    size = config.get("graph", "size") or size
    weight = config.get("graph", "weight")
    if kind == "cycle":
        return cycle(size, target, gains[0] if gains else None, weight)
    if kind == "bouquet":
        return bouquet(size, target, gains, weight)
    if kind == "path":
        return path(size, target, weight)
    # a lattice with free boundary: the energy is then the plain Dirichlet sum
    return grid(size, size, target, pin_boundary=False)


def _natural_gain(space: NpcSpace) -> str:
    """A gain acting nontrivially on ``space`` (identity on trees)."""
    if isinstance(space, Euclidean):
        return "shift(" + ",".join(["1"] + ["0"] * (space.dim - 1)) + ")"
    if isinstance(space, CuspFactor) or (isinstance(space, Product) and isinstance(space.factors[0], CuspFactor)):
        return "tau1"
    if space.describe().startswith("hyperbolic"):
        return "hyp(1)"
    return "id"


def _interior_sample(space: NpcSpace, rng, n: int) -> np.ndarray:
    """Random points with every cusp radius strictly positive."""
    pts = space.sample(rng, n, 1.0)
    for s in cusp_factor_slots(space, pts.shape[-1]):
        zero = pts[:, s] == 0
        pts[zero, s] = rng.uniform(0.05, 1.0, zero.sum())
        pts[zero, s + 1] = rng.uniform(-2.0, 2.0, zero.sum())
    return pts


# scenarios -----------------------------------------------------------------------

AUDIT_TARGETS = ("euclidean(2)", "hyperbolic", "tree(3)", "cusp", "model")


def _npc_audit(config: ScenarioConfig) -> _Outcome:
    out = _Outcome()
    seed = config.seed
    samples = config.get("checks", "samples")
    pairs = config.get("checks", "pairs")
    size = config.get("graph", "size") or 8
    specs = [config.get("target", "spec")] if config.get("target", "spec") else list(AUDIT_TARGETS)
    audit_table = Table(("target", "samples", "min_npc_slack", "max_symmetry_error", "min_triangle_slack",
                         "max_speed_error", "max_abs_npc_slack"))
    conv_table = Table(("target", "gain", "t", "max_energy_excess", "min_deficit"))
    for k, spec in enumerate(specs):
        space = parse_target(spec, config.genus)
        name = space.describe()
        audit = audit_space(space, samples=samples, seed=seed + k)
        audit_table.add(name, samples, audit.min_npc_slack, audit.max_symmetry_error, audit.min_triangle_slack,
                        audit.max_speed_error, audit.max_abs_npc_slack)
        if isinstance(space, Euclidean):
            out.verdicts.append(_at_most(f"npc_slack_exact[{name}]", audit.max_abs_npc_slack,
                                         config.get("checks", "exact_tol")))
        else:
            out.verdicts.append(_at_least(f"npc_slack[{name}]", audit.min_npc_slack, -config.get("checks", "npc_tol")))
        metric_ok = audit.passed(npc_tol=math.inf)
        out.verdicts.append(Verdict(f"metric_axioms[{name}]", PASS if metric_ok else FAIL,
                                    max(audit.max_symmetry_error, audit.max_speed_error, -audit.min_triangle_slack),
                                    "symmetry <= 1e-9, triangle >= -1e-8, speed <= 1e-6"))

        if pairs:
            gains = config.get("graph", "gains") if config.get("target", "spec") else None
            gain = gains[0] if gains else _natural_gain(space)
            graph = cycle(size, space, gain, config.get("graph", "weight"))
            rng = np.random.default_rng(seed + 1000 + k)
            n = graph.vertex_count
            u = space.sample(rng, pairs * n, 1.0).reshape(pairs, n, -1)
            v = space.sample(rng, pairs * n, 1.0).reshape(pairs, n, -1)
            excess, deficit = stacked_convexity(graph, u, v, CONVEXITY_TS)
            for t, ex, de in zip(CONVEXITY_TS, excess, deficit):
                conv_table.add(name, gain, t, float(ex.max()), float(de.min()))
            tol = config.get("checks", "convexity_tol")
            out.verdicts.append(_at_most(f"energy_convexity[{name}]", excess.max(), tol, pairs=pairs, gain=gain))
            out.verdicts.append(_at_least(f"convexity_deficit[{name}]", deficit.min(), -tol, pairs=pairs, gain=gain))
    out.tables["audit"] = audit_table
    if pairs:
        out.tables["convexity"] = conv_table
    return out


def _relative_christoffel_error(metric: ModelMetric, pts: np.ndarray) -> np.ndarray:
    exact = christoffel(metric, pts)
    approx = christoffel_fd(metric, pts)
    num = np.linalg.norm((exact - approx).reshape(len(pts), -1), axis=1)
    den = np.linalg.norm(exact.reshape(len(pts), -1), axis=1)
    return num / den


def _metric_orders(config: ScenarioConfig) -> _Outcome:
    out = _Outcome()
    chk = lambda key: config.get("checks", key)  # noqa: E731
    leading = ModelMetric.leading_order(config.genus)
    slope_g, slope_gamma = order_exponents(leading)
    out.verdicts.append(_near("slope_G_thetatheta", slope_g, 6.0, chk("slope_tol")))
    out.verdicts.append(_near("slope_Gamma_u_thetatheta", slope_gamma, 5.0, chk("slope_tol")))

    us = np.geomspace(1e-2, 1e-1, 20)
    curv = gauss_curvature_factor(leading, us)
    curv_err = float(np.max(np.abs(curv * us**2 + 6.0) / 6.0))
    out.verdicts.append(_at_most("gauss_curvature_vs_minus6_over_u2", curv_err, 1e-10))

    rng = np.random.default_rng(config.seed)
    n = min(chk("samples"), 1000)
    pts = np.empty((n, leading.dim))
    pts[:, 0::2] = rng.uniform(1e-2, 1.0, (n, leading.curves))
    pts[:, 1::2] = rng.uniform(-3.0, 3.0, (n, leading.curves))
    chr_table = Table(("metric", "points", "max_relative_error"))
    for label, metric in (("leading", leading), ("perturbed", ModelMetric.perturbed(0.3, config.genus))):
        err = _relative_christoffel_error(metric, pts)
        chr_table.add(label, n, float(err.max()))
        out.verdicts.append(_at_most(f"christoffel_vs_fd[{label}]", err.max(), chk("christoffel_rtol"), points=n))

    a = np.geomspace(1e-2, 1e-1, 12)
    zeros = np.zeros_like(a)
    d = cusp.distance(np.stack([a, zeros], -1), np.stack([a, zeros + 1.0], -1))
    slope = loglog_slope(a, d)
    out.verdicts.append(_near("displacement_slope", slope, 3.0, chk("displacement_tol")))
    disp_table = Table(("a", "distance", "grid_oracle", "relative_error"))
    worst = 0.0
    for k, (ak, dk) in enumerate(zip(a, d)):
        if k % 4 == 0 or k == len(a) - 1:
            ref = grid_distance([ak, 0.0], [ak, 1.0])
            rel = abs(dk - ref) / ref
            worst = max(worst, rel)
            disp_table.add(float(ak), float(dk), float(ref), float(rel))
        else:
            disp_table.add(float(ak), float(dk), "", "")
    out.verdicts.append(_at_most("displacement_vs_grid_oracle", worst, chk("oracle_rtol")))
    out.tables["christoffel"] = chr_table
    out.tables["displacement"] = disp_table
    return out


def _stratification(config: ScenarioConfig) -> _Outcome:
    out = _Outcome()
    chk = lambda key: config.get("checks", key)  # noqa: E731
    target = _target(config, "model")
    gains = _gains(config, ["tau1"])
    graph = _build_graph(config, target, "cycle", 8, gains)
    rng = np.random.default_rng(config.seed)
    sched = _schedule(config)
    u, trace = minimize(graph, random_map(graph, rng), sched, seed=config.seed)
    slots = cusp_factor_slots(target, target.dim)
    if not slots:
        raise ValueError("the stratification scenario needs a target with a cusp factor")
    min_u1 = float(as_values(graph, u)[:, slots[0]].min())
    out.tables["trace"] = trace
    out.verdicts.append(_at_most("collapse_min_u1", min_u1, chk("collapse_u"), sweeps=trace.sweeps,
                                 termination=trace.termination))
    out.verdicts.append(_at_most("collapse_energy", trace.final_energy, chk("collapse_energy"),
                                 sweeps=trace.sweeps))
    out.verdicts.append(_at_most("collapse_sweeps", trace.sweeps, 10_000))

    level, radius, samples = (config.get("probe", k) for k in ("level", "search_radius", "samples"))
    probe_gens = [parse_word(g) for g in (config.get("probe", "generators") or gains)]
    twist_probe = properness_probe(probe_gens, level, radius, samples, config.seed, target)
    hyp_space = parse_target("hyperbolic")
    hyp_gens = [parse_word("hyp(1,0)"), parse_word(f"hyp(1,{HALF_TURN})")]
    hyp_probe = properness_probe(hyp_gens, level, radius, samples, config.seed, hyp_space)
    table = Table(("generators", "verdict", "farthest_sublevel_distance", "search_radius"))
    for label, rep, want in (("twist", twist_probe, "escaped"), ("hyperbolic", hyp_probe, "bounded_within_radius")):
        table.add(label, rep.sublevel_bounded, rep.farthest_sublevel_distance, rep.search_radius)
        out.verdicts.append(Verdict(f"probe[{label}]", PASS if rep.sublevel_bounded == want else FAIL,
                                    rep.sublevel_bounded, want,
                                    {"farthest_sublevel_distance": rep.farthest_sublevel_distance}))
    out.tables["probe"] = table
    return out


def _unique_continuation(config: ScenarioConfig) -> _Outcome:
    out = _Outcome()
    chk = lambda key: config.get("checks", key)  # noqa: E731
    target = model_target(config.genus)
    rng = np.random.default_rng(config.seed)
    count = chk("stratum_pairs")
    slot = cusp_factor_slots(target, target.dim)[1]

    p = _interior_sample(target, rng, count)
    q = _interior_sample(target, rng, count)
    p[:, slot], q[:, slot] = 0.0, 0.0
    p[:, slot + 1], q[:, slot + 1] = np.nan, np.nan
    worst_u2, off_stratum = 0.0, 0
    for a, b in zip(p, q):
        _, strata, radii = geodesic_stratum_trace(target, a, b)
        worst_u2 = max(worst_u2, float(radii[:, 1].max()))
        off_stratum += sum(2 not in s.pinched for s in strata)
    out.verdicts.append(_at_most("boundary_pairs_stay_in_stratum", worst_u2, chk("stratum_tol"), pairs=count,
                                 samples_off_stratum=off_stratum))

    p = _interior_sample(target, rng, count)
    q = _interior_sample(target, rng, count)
    nonempty, min_radius = 0, math.inf
    for a, b in zip(p, q):
        _, strata, radii = geodesic_stratum_trace(target, a, b)
        nonempty += sum(not s.is_interior for s in strata)
        min_radius = min(min_radius, float(radii.min()))
    out.verdicts.append(Verdict("interior_pairs_stay_interior", PASS if nonempty == 0 else FAIL, nonempty, "== 0",
                                {"pairs": count, "min_radius": min_radius}))

    table = Table(("problem", "size", "sweeps", "termination", "residual", "error", "constant", "min_u"))
    exact = refinement_study(ProfileHarmonicMap(), exact=True, genus=config.genus)
    for lv in exact:
        table.add("interior", lv.size, lv.sweeps, lv.termination, lv.residual, lv.error, lv.constant, lv.min_u)
    ratios = [a.residual / b.residual for a, b in zip(exact, exact[1:])]
    out.verdicts.append(_at_least("residual_decay_per_refinement", min(ratios), chk("residual_decay"),
                                  ratios=ratios, sizes=[lv.size for lv in exact]))

    near = refinement_study(NearStratumData(), genus=config.genus)
    for lv in near:
        table.add("near_stratum", lv.size, lv.sweeps, lv.termination, lv.residual, lv.error, lv.constant, lv.min_u)
    c_coarse, c_fine = near[-2].constant, near[-1].constant
    spread = max(c_coarse, c_fine) / min(c_coarse, c_fine) if min(c_coarse, c_fine) > 0 else math.inf
    out.verdicts.append(_at_most("subsolution_constant_ratio", spread, chk("constant_ratio"),
                                 constants=[lv.constant for lv in near], sizes=[lv.size for lv in near]))
    out.tables["refinement"] = table
    return out


def _uniqueness(config: ScenarioConfig) -> _Outcome:
    out = _Outcome()
    chk = lambda key: config.get("checks", key)  # noqa: E731
    target = _target(config, "hyperbolic")
    gains = _gains(config, ["hyp(1,0)", f"hyp(1,{HALF_TURN})"])
    graph = _build_graph(config, target, "bouquet", 4, gains)
    seeds = [config.seed + s for s in config.get("run", "seeds")]
    rep = uniqueness_test(graph, seeds, _schedule(config))
    table = Table(("seed", "energy", "termination"))
    for s, e, t in zip(rep.seeds, rep.energies, rep.terminations):
        table.add(s, e, t)
    out.tables["seeds"] = table
    detail = {"on_geodesic": rep.on_geodesic, "constant": rep.constant, "geodesic_gap": rep.geodesic_gap,
              "seeds": rep.seeds}
    if rep.degenerate:
        out.verdicts.append(Verdict("max_pairwise_d2", DEGENERATE, rep.max_pairwise_d2, f"<= {chk('d2_tol')!r}",
                                    detail))
    else:
        out.verdicts.append(_at_most("max_pairwise_d2", rep.max_pairwise_d2, chk("d2_tol"), **detail))
    if chk("energy_target") is not None:
        best = min(rep.energies)
        out.verdicts.append(_near("minimal_energy", best, chk("energy_target"), chk("energy_tol")))
    return out


def _properness(config: ScenarioConfig) -> _Outcome:
    out = _Outcome()
    target = _target(config, "model")
    gens = [parse_word(g) for g in (config.get("probe", "generators") or _gains(config, ["tau1"]))]
    level, radius, samples = (config.get("probe", k) for k in ("level", "search_radius", "samples"))
    rep = properness_probe(gens, level, radius, samples, config.seed, target)
    want = config.get("probe", "expect")
    out.verdicts.append(Verdict("probe_verdict", PASS if rep.sublevel_bounded == want else FAIL,
                                rep.sublevel_bounded, want,
                                {"farthest_sublevel_distance": rep.farthest_sublevel_distance}))
    table = Table(("shell_scale", "min_delta"))
    for s, d in zip(rep.shell_scales, rep.delta_values):
        table.add(s, d)
    out.tables["shells"] = table
    return out


SCENARIO_RUNNERS = {
    "npc-audit": _npc_audit,
    "metric-orders": _metric_orders,
    "stratification": _stratification,
    "unique-continuation": _unique_continuation,
    "uniqueness": _uniqueness,
    "properness": _properness,
}


def run_scenario(config: ScenarioConfig, out_dir=None, write: bool = True,
                 timestamp: bool = True) -> ScenarioReport:
    """Execute the configured scenario.

    With ``write`` set, each table goes to ``<out_dir>/<scenario>-<name>.csv``
    and the report to ``<out_dir>/<scenario>-report.json``; ``out_dir``
    defaults to ``run.out_dir``.  ``timestamp=False`` leaves the elapsed time
    out of the JSON so that reruns are byte-identical.  I/O failures raise
    ``OutputError``.
    """
    start = time.perf_counter()
    outcome = SCENARIO_RUNNERS[config.scenario](config)
    out_dir = Path(out_dir if out_dir is not None else config.get("run", "out_dir"))
    paths = []
    if write:
        for name, artifact in outcome.tables.items():
            fname = f"{config.scenario}-{name}.csv"
            emit_csv(artifact, out_dir / fname)
            paths.append(fname)
    report = ScenarioReport(config.scenario, outcome.verdicts, paths, config.digest(),
                            time.perf_counter() - start, config.seed)
    if write:
        write_json(report.as_dict(timestamp), out_dir / f"{config.scenario}-report.json")
    return report
