"""Command line entry point: subcommands, exit codes and reproducible reports."""

import json
from pathlib import Path

import pytest

from harmlab.cli import main

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
TWIST = CONFIG_DIR / "properness-twist.cfg"


def _write(tmp_path, text, name="c.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestRun:
    def test_pass(self, tmp_path, capsys):
        assert main(["run", str(TWIST), "--out-dir", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "properness-report.json").read_text())
        assert report["status"] == "pass"
        assert set(report) == {"scenario", "status", "seed", "verdicts", "csv", "config_hash", "elapsed_seconds"}
        assert all((tmp_path / name).exists() for name in report["csv"])
        assert "properness: pass" in capsys.readouterr().out

    def test_failed_check(self, tmp_path):
        text = TWIST.read_text().replace("expect = escaped", "expect = bounded_within_radius")
        assert main(["run", _write(tmp_path, text), "--out-dir", str(tmp_path)]) == 2
        report = json.loads((tmp_path / "properness-report.json").read_text())
        assert report["status"] == "fail"

    def test_degenerate_flag(self, tmp_path):
        code = main(["run", str(CONFIG_DIR / "solver-euclidean.cfg"), "--out-dir", str(tmp_path)])
        assert code == 3
        report = json.loads((tmp_path / "uniqueness-report.json").read_text())
        verdicts = {v["check"]: v for v in report["verdicts"]}
        assert verdicts["max_pairwise_d2"]["status"] == "degenerate-flagged"
        assert verdicts["minimal_energy"]["status"] == "pass"

    def test_invalid_config(self, tmp_path, capsys):
        assert main(["run", _write(tmp_path, "[run]\nscenario = uniqueness\n[target]\ngenus = 1\n")]) == 1
        assert "line 4" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.cfg")]) == 4

    def test_unwritable_out_dir(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["run", str(TWIST), "--out-dir", str(blocker)]) == 4

    def test_byte_identical_without_timestamp(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["run", str(TWIST), "--out-dir", str(out), "--no-timestamp", "--seed", "3"]) == 0
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes()
        assert json.loads((a / "properness-report.json").read_text())["elapsed_seconds"] is None

    def test_seed_override_is_recorded(self, tmp_path):
        main(["run", str(TWIST), "--out-dir", str(tmp_path), "--seed", "11", "--no-timestamp"])
        assert json.loads((tmp_path / "properness-report.json").read_text())["seed"] == 11


class TestValidate:
    def test_prints_normalized_config(self, capsys):
        assert main(["validate", str(TWIST)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("# valid properness config, hash ")
        assert "[probe]" in out

    def test_defaults_flag(self, capsys):
        main(["validate", str(TWIST), "--defaults"])
        assert "max_sweeps = 10000" in capsys.readouterr().out

    def test_invalid(self, tmp_path):
        assert main(["validate", _write(tmp_path, "[run]\n")]) == 1


class TestAuditSpace:
    def test_euclidean_exact(self, capsys):
        assert main(["audit-space", "euclidean(2)", "--samples", "500"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["passed"] and record["exact_check"]

    def test_model(self, capsys):
        assert main(["audit-space", "model", "--samples", "200"]) == 0
        assert json.loads(capsys.readouterr().out)["passed"]

    def test_bad_target(self):
        assert main(["audit-space", "sphere"]) == 1


class TestArguments:
    def test_no_command(self):
        assert main([]) == 1

    def test_unknown_option(self):
        assert main(["run", str(TWIST), "--fast"]) == 1

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "run" in capsys.readouterr().out


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.cfg")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    assert main(["validate", str(path)]) == 0
