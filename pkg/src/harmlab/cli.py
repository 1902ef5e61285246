"""``harmlab`` command line: run or validate scenario configs and audit targets.

Exit codes: 0 pass, 1 invalid configuration or arguments, 2 a check failed,
3 degenerate case flagged (no failures), 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from harmlab.experiments.config import ConfigError, emit_config, parse_config, parse_target
from harmlab.experiments.output import OutputError, sanitize
from harmlab.experiments.scenarios import EXIT_CONFIG, EXIT_IO, run_scenario
from harmlab.npc.ops import audit_space
from harmlab.npc.spaces import Euclidean, GeometryInputError


def _load(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return None, EXIT_IO
    try:
        return parse_config(text), 0
    except ConfigError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return None, EXIT_CONFIG


def _cmd_run(args) -> int:
    config, code = _load(args.config)
    if config is None:
        return code
    if args.seed is not None:
        config = config.with_value("run", "seed", args.seed)
    out_dir = args.out_dir if args.out_dir is not None else config.get("run", "out_dir")
    try:
        report = run_scenario(config, out_dir, timestamp=not args.no_timestamp)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for v in report.verdicts:
        print(f"{v.status:>18}  {v.check}  measured={v.measured!r}  threshold={v.threshold}")
    print(f"{report.scenario}: {report.status}  ({report.elapsed_seconds:.2f} s)  report in {out_dir}")
    return report.exit_code


def _cmd_validate(args) -> int:
    config, code = _load(args.config)
    if config is None:
        return code
    print(f"# valid {config.scenario} config, hash {config.digest()}")
    print(emit_config(config, include_defaults=args.defaults), end="")
    return 0


def _cmd_audit(args) -> int:
    try:
        space = parse_target(args.target, args.genus)
    except GeometryInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = audit_space(space, samples=args.samples, seed=args.seed)
    exact = isinstance(space, Euclidean)
    ok = result.passed(npc_tol=args.npc_tol, exact=exact)
    record = dict(vars(result), passed=ok, exact_check=exact)
    print(json.dumps(sanitize(record), indent=2))
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harmlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="override run.seed")
    run.add_argument("--out-dir", help="override run.out_dir")
    run.add_argument("--no-timestamp", action="store_true",
                     help="omit wall-clock time so reruns give byte-identical reports")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a config and print its normalized form")
    val.add_argument("config")
    val.add_argument("--defaults", action="store_true", help="also print keys left at their defaults")
    val.set_defaults(func=_cmd_validate)

    aud = sub.add_parser("audit-space", help="sampled CAT(0) audit of a target, e.g. 'hyperbolic*cusp'")
    aud.add_argument("target")
    aud.add_argument("--samples", type=int, default=10_000)
    aud.add_argument("--seed", type=int, default=0)
    aud.add_argument("--genus", type=int, default=2)
    aud.add_argument("--npc-tol", type=float, default=1e-6)
    aud.set_defaults(func=_cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for failed checks
        return EXIT_CONFIG if exc.code else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
