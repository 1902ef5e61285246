"""Acceptance suite: one check per criterion, run from the shipped configs.

Each test records a single ``PASS`` or ``FAIL`` line with the measured
values and the wall time; the lines are printed in the pytest terminal
summary (see ``conftest.py``) and when the file is run as a script.
Scenario runs shared between criteria are executed once per session.
"""

from __future__ import annotations

import time
from pathlib import Path

import pytest

from harmlab.cli import main
from harmlab.experiments.config import parse_config
from harmlab.experiments.scenarios import DEGENERATE, PASS, run_scenario

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
RESULT_LINES: list[str] = []
_RUNS: dict = {}


def scenario_run(name: str, out_root: Path):
    """``(report, seconds)`` for ``configs/<name>.cfg``, cached per session."""
    if name not in _RUNS:
        config = parse_config((CONFIG_DIR / f"{name}.cfg").read_text())
        start = time.perf_counter()
        report = run_scenario(config, out_root / name, timestamp=False)
        _RUNS[name] = (report, time.perf_counter() - start)
    return _RUNS[name]


def verdicts(report, prefix: str) -> list:
    return [v for v in report.verdicts if v.check == prefix or v.check.startswith(prefix + "[")]


def record(criterion: str, ok: bool, detail: str, seconds: float | None = None) -> None:
    timing = f"  [{seconds:.1f} s]" if seconds is not None else ""
    line = f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}{timing}"
    RESULT_LINES.append(line)
    print(line)
    assert ok, line


def summarize(found: list) -> str:
    return "; ".join(f"{v.check}={v.measured!r} ({v.status})" for v in found)


@pytest.fixture(scope="session")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def test_cat0_audit(out_root):
    report, secs = scenario_run("npc-audit", out_root)
    found = verdicts(report, "npc_slack") + verdicts(report, "npc_slack_exact") + verdicts(report, "metric_axioms")
    targets = len(verdicts(report, "metric_axioms"))
    ok = targets == 5 and all(v.status == PASS for v in found) and secs < 30
    record("CAT(0) audit, 10^4 quadruples in five targets, < 30 s", ok, summarize(found), secs)


def test_metric_orders(out_root):
    report, secs = scenario_run("metric-orders", out_root)
    found = (verdicts(report, "slope_G_thetatheta") + verdicts(report, "slope_Gamma_u_thetatheta")
             + verdicts(report, "christoffel_vs_fd"))
    ok = len(found) == 4 and all(v.status == PASS for v in found) and secs < 10
    record("metric orders 6 / 5 and Christoffel vs finite differences, < 10 s", ok, summarize(found), secs)


def test_displacement_law(out_root):
    report, secs = scenario_run("metric-orders", out_root)
    found = verdicts(report, "displacement_slope") + verdicts(report, "displacement_vs_grid_oracle")
    ok = len(found) == 2 and all(v.status == PASS for v in found) and secs < 60
    record("twist displacement slope 3 and grid oracle to 1e-3, < 60 s", ok, summarize(found), secs)


def test_totally_geodesic_strata(out_root):
    report, secs = scenario_run("unique-continuation", out_root)
    found = verdicts(report, "boundary_pairs_stay_in_stratum") + verdicts(report, "interior_pairs_stay_interior")
    ok = len(found) == 2 and all(v.status == PASS for v in found) and secs < 60
    record("stratum membership along 100 + 100 geodesics, < 60 s", ok, summarize(found), secs)


def test_energy_convexity(out_root):
    report, secs = scenario_run("npc-audit", out_root)
    found = verdicts(report, "energy_convexity") + verdicts(report, "convexity_deficit")
    ok = len(found) == 10 and all(v.status == PASS for v in found) and secs < 60
    record("energy convexity and deficit on 10^3 map pairs per target, < 60 s", ok, summarize(found), secs)


def test_solver_translation_cycle(out_root):
    flat, t_flat = scenario_run("solver-euclidean", out_root)
    hyp, t_hyp = scenario_run("uniqueness-axis", out_root)
    found = verdicts(flat, "minimal_energy") + verdicts(hyp, "minimal_energy")
    tols = [v.threshold for v in found]
    ok = (len(found) == 2 and all(v.status == PASS for v in found)
          and tols == ["0.125 +- 1e-08", "0.125 +- 1e-06"] and t_flat + t_hyp < 10)
    record("8-cycle translation energy 1/8 (Euclidean 1e-8, hyperbolic 1e-6), < 10 s", ok,
           summarize(found), t_flat + t_hyp)


def test_stratification(out_root):
    report, secs = scenario_run("stratification", out_root)
    found = [v for v in report.verdicts]
    ok = len(found) == 5 and all(v.status == PASS for v in found) and secs < 120
    record("twist-gain collapse and properness probes, < 120 s", ok, summarize(found), secs)


def test_empirical_uniqueness(out_root):
    report, secs = scenario_run("uniqueness", out_root)
    found = verdicts(report, "max_pairwise_d2")
    flagged = [verdicts(scenario_run(n, out_root)[0], "max_pairwise_d2")[0] for n in ("uniqueness-axis",
                                                                                      "solver-euclidean")]
    ok = (len(found) == 1 and found[0].status == PASS and len(report.verdicts[0].detail["seeds"]) == 5
          and all(v.status == DEGENERATE for v in flagged) and secs < 120)
    record("5-seed uniqueness d2 <= 1e-4, geodesic images flagged, < 120 s", ok,
           summarize(found) + "; flagged: " + ", ".join(v.status for v in flagged), secs)


def test_subsolution_and_residual(out_root):
    report, secs = scenario_run("unique-continuation", out_root)
    found = verdicts(report, "subsolution_constant_ratio") + verdicts(report, "residual_decay_per_refinement")
    ok = len(found) == 2 and all(v.status == PASS for v in found) and secs < 120
    record("subsolution constant within x2, residual decay >= x2 per refinement, < 120 s", ok,
           summarize(found), secs)


@pytest.mark.parametrize("name", ["stratification", "uniqueness-axis", "metric-orders"])
def test_determinism(name, tmp_path):
    start = time.perf_counter()
    dirs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["run", str(CONFIG_DIR / f"{name}.cfg"), "--out-dir", str(d), "--no-timestamp"]) for d in dirs]
    files = sorted(p.name for p in dirs[0].iterdir())
    same = files == sorted(p.name for p in dirs[1].iterdir()) and all(
        (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files)
    record(f"byte-identical reruns with --no-timestamp [{name}]", same and codes[0] == codes[1],
           f"{len(files)} files, exit codes {codes}", time.perf_counter() - start)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
