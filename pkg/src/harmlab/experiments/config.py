"""Scenario configuration: a sectioned ``key = value`` text format.

Example::

    [run]
    scenario = stratification
    seed = 0

    [target]
    genus = 2

Lines starting with ``#`` or ``;`` are comments.  Every key belongs to a
section; unknown sections and keys are rejected.  ``CONFIG_SCHEMA``
lists all keys with their types and defaults, and ``docs/config.md``
describes them.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

from harmlab.npc.spaces import CuspFactor, Euclidean, GeometryInputError, HyperbolicPlane, NpcSpace, StarTree
from harmlab.npc.ops import product_space
from harmlab.wp.isometry import parse_word

SCENARIOS = ("npc-audit", "metric-orders", "stratification", "unique-continuation", "uniqueness", "properness")
GRAPH_KINDS = ("cycle", "grid", "path", "bouquet")
REQUIRED = (("run", "scenario"), ("target", "genus"))


class ConfigError(ValueError):
    """Invalid configuration text; ``line`` is 1-based or ``None``."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _str_list(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(";") if x.strip())


def _opt_float(text: str):
    return None if text.lower() in ("", "auto", "none") else float(text)


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


# section -> key -> (parser, default); ``None`` defaults mean "scenario decides"
CONFIG_SCHEMA = {
    "run": {
        "scenario": (_choice(SCENARIOS), None),
        "seed": (int, 0),
        "seeds": (_int_list, (0, 1, 2, 3, 4)),
        "out_dir": (str, "results"),
    },
    "target": {
        "genus": (int, None),
        "spec": (str, None),
    },
    "graph": {
        "kind": (_choice(GRAPH_KINDS), None),
        "size": (int, None),
        "gains": (_str_list, None),
        "weight": (float, 1.0),
    },
    "solver": {
        "order": (_choice(("random", "colored", "sequential")), None),
        "max_sweeps": (int, 10_000),
        "tol_energy": (_opt_float, None),
        "tol_move": (float, 1e-8),
        "stratum_search": (_bool, True),
        "omega": (float, 1.0),
    },
    "checks": {
        "samples": (int, 10_000),
        "pairs": (int, 1000),
        "stratum_pairs": (int, 100),
        "npc_tol": (float, 1e-6),
        "exact_tol": (float, 1e-12),
        "convexity_tol": (float, 1e-8),
        "slope_tol": (float, 0.05),
        "displacement_tol": (float, 0.1),
        "oracle_rtol": (float, 1e-3),
        "christoffel_rtol": (float, 1e-4),
        "stratum_tol": (float, 1e-9),
        "collapse_u": (float, 1e-3),
        "collapse_energy": (float, 1e-6),
        "d2_tol": (float, 1e-4),
        "energy_target": (_opt_float, None),
        "energy_tol": (float, 1e-6),
        "residual_decay": (float, 2.0),
        "constant_ratio": (float, 2.0),
    },
    "probe": {
        "level": (float, 1.5),
        "search_radius": (float, 3.0),
        "samples": (int, 4000),
        "generators": (_str_list, None),
        "expect": (_choice(("escaped", "bounded_within_radius")), None),
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated configuration; ``sections`` holds every key with defaults filled.

    ``explicit`` records which ``(section, key)`` pairs were written in the
    source text, so that ``emit_config`` reproduces the same document.
    """

    sections: dict
    explicit: frozenset = field(default_factory=frozenset)

    def get(self, section: str, key: str):
        return self.sections[section][key]

    @property
    def scenario(self) -> str:
        return self.sections["run"]["scenario"]

    @property
    def genus(self) -> int:
        return self.sections["target"]["genus"]

    @property
    def seed(self) -> int:
        return self.sections["run"]["seed"]

    def with_value(self, section: str, key: str, value) -> "ScenarioConfig":
        if key not in CONFIG_SCHEMA.get(section, {}):
            raise ConfigError(f"unknown key {section}.{key}")
        sections = {s: dict(v) for s, v in self.sections.items()}
        sections[section][key] = value
        return ScenarioConfig(sections, self.explicit | {(section, key)})

    def canonical(self) -> dict:
        """Plain-JSON view of all settings (defaults included)."""
        return {s: {k: _jsonable(v) for k, v in sorted(keys.items())} for s, keys in sorted(self.sections.items())}

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.digest())


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate configuration text.

    Errors name the offending line for unknown sections or keys, malformed
    lines, duplicate keys and values of the wrong type; a missing required
    key is reported with the full list of required keys.
    """
    values = {s: {} for s in CONFIG_SCHEMA}
    lines = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            if section not in CONFIG_SCHEMA:
                raise ConfigError(f"unknown section [{section}]", number)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", number)
        if section is None:
            raise ConfigError("key outside of any section", number)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in CONFIG_SCHEMA[section]:
            allowed = ", ".join(CONFIG_SCHEMA[section])
            raise ConfigError(f"unknown key {key!r} in [{section}] (allowed: {allowed})", number)
        if key in values[section]:
            raise ConfigError(f"duplicate key {section}.{key}", number)
        parser = CONFIG_SCHEMA[section][key][0]
        try:
            values[section][key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}", number) from None
        lines[(section, key)] = number

    missing = [f"{s}.{k}" for s, k in REQUIRED if k not in values[s]]
    if missing:
        need = ", ".join(f"{s}.{k}" for s, k in REQUIRED)
        raise ConfigError(f"missing required keys: {', '.join(missing)} (required: {need})")
    if values["target"]["genus"] < 2:
        raise ConfigError("genus must be ≥ 2", lines[("target", "genus")])

    explicit = frozenset(lines)
    sections = {s: {k: values[s].get(k, default) for k, (_, default) in keys.items()}
                for s, keys in CONFIG_SCHEMA.items()}
    _check_semantics(sections, lines)
    return ScenarioConfig(sections, explicit)


def _check_semantics(sections: dict, lines: dict) -> None:
    def fail(section, key, message):
        raise ConfigError(message, lines.get((section, key)))

    spec = sections["target"]["spec"]
    if spec is not None:
        try:
            parse_target(spec, sections["target"]["genus"])
        except GeometryInputError as exc:
            fail("target", "spec", f"bad target spec: {exc}")
    for s, k in (("graph", "gains"), ("probe", "generators")):
        for word in sections[s][k] or ():
            try:
                parse_word(word)
            except GeometryInputError as exc:
                fail(s, k, str(exc))
    size = sections["graph"]["size"]
    if size is not None and size < 2:
        fail("graph", "size", "graph size must be at least 2")
    for s, k in (("solver", "max_sweeps"), ("checks", "samples"), ("checks", "pairs"),
                 ("checks", "stratum_pairs"), ("probe", "samples")):
        if sections[s][k] < 0:
            fail(s, k, f"{s}.{k} must be nonnegative")
    omega = sections["solver"]["omega"]
    if not 1.0 <= omega < 2.0:
        fail("solver", "omega", "omega must lie in [1, 2)")
    if sections["probe"]["level"] <= 0:
        fail("probe", "level", "probe level must be positive")
    if len(sections["run"]["seeds"]) < 2:
        fail("run", "seeds", "at least two seeds are needed")
    if sections["run"]["scenario"] == "properness" and sections["probe"]["expect"] is None:
        fail("run", "scenario", "the properness scenario needs probe.expect")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], int):
            return ",".join(str(v) for v in value)
        return "; ".join(value)
    return str(value)


def emit_config(config: ScenarioConfig, include_defaults: bool = False) -> str:
    """Text that ``parse_config`` maps back to an equal configuration."""
    out = []
    for section, keys in CONFIG_SCHEMA.items():
        rows = []
        for key in keys:
            value = config.sections[section][key]
            if value is None:
                continue
            if include_defaults or (section, key) in config.explicit:
                rows.append(f"{key} = {_format_value(value)}")
        if rows:
            out.append(f"[{section}]")
            out.extend(rows)
            out.append("")
    return "\n".join(out)


# target mini-language -----------------------------------------------------------

_FACTOR = re.compile(r"^([a-z]+)(?:\(([^)]*)\))?$")


def parse_target(spec: str, genus: int = 2) -> NpcSpace:
    """Build a target from text such as ``hyperbolic``, ``euclidean(2)``,
    ``tree(3)``, ``cusp``, ``model`` / ``model(g)`` or products joined by ``*``.

    ``model`` alone means the genus-``genus`` model with ``3 genus - 3`` cusp
    factors.  A single factor is returned unwrapped.
    """
    factors = []
    for chunk in spec.replace(" ", "").split("*"):
        m = _FACTOR.match(chunk)
        if not m:
            raise GeometryInputError(f"cannot parse target factor {chunk!r}")
        name, arg = m.group(1), m.group(2)
        try:
            if name == "euclidean":
                factors.append(Euclidean(int(arg) if arg else 1))
            elif name == "hyperbolic":
                if arg:
                    raise GeometryInputError("hyperbolic takes no argument")
                factors.append(HyperbolicPlane())
            elif name == "tree":
                factors.append(StarTree.uniform(int(arg) if arg else 3))
            elif name == "cusp":
                count = int(arg) if arg else 1
                factors.extend(CuspFactor() for _ in range(count))
            elif name == "model":
                g = int(arg) if arg else genus
                if g < 2:
                    raise GeometryInputError("genus must be ≥ 2")
                factors.extend(CuspFactor() for _ in range(3 * g - 3))
            else:
                raise GeometryInputError(f"unknown target factor {name!r}")
        except ValueError as exc:
            raise GeometryInputError(f"bad argument in {chunk!r}: {exc}") from None
    if not factors:
        raise GeometryInputError("empty target spec")
    return factors[0] if len(factors) == 1 else product_space(factors)
