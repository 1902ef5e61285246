"""Configuration, scenarios and result files for the command-line front end."""

from harmlab.experiments.config import (
    CONFIG_SCHEMA,
    SCENARIOS,
    ConfigError,
    ScenarioConfig,
    emit_config,
    parse_config,
    parse_target,
)
from harmlab.experiments.output import OutputError, Table, emit_csv, read_csv, write_json
from harmlab.experiments.scenarios import (
    DEGENERATE,
    EXIT_CODES,
    FAIL,
    PASS,
    ScenarioReport,
    Verdict,
    run_scenario,
)

__all__ = [
    "CONFIG_SCHEMA", "SCENARIOS", "ConfigError", "ScenarioConfig", "emit_config", "parse_config",
    "parse_target", "OutputError", "Table", "emit_csv", "read_csv", "write_json", "DEGENERATE",
    "EXIT_CODES", "FAIL", "PASS", "ScenarioReport", "Verdict", "run_scenario",
]
