"""Command-line front end: check, lint, ir, run.

Exit codes are stable: 0 success, 1 compile diagnostics, 2 I/O or format
errors, 3 scenario expectation mismatch. Diagnostics go to stderr; traces
and table dumps go to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .diagnostics import CompileError, ConfigError, DiagnosticError
from .parser import parse_source
from .runtime import DEFAULT_CAP_SPEED, DEFAULT_NOMINAL_SPEED, MonitorConfig, evaluate, lower
from .sema import lint, typecheck
from .sensors import Scenario, load_scenario

EXIT_OK = 0
EXIT_COMPILE = 1
EXIT_IO = 2
EXIT_MISMATCH = 3

SPEED_TOLERANCE = 1e-9

_CONFIG_HELP = (
    "JSON config: {\"nominal_speed\": m/s, \"default_cap\": m/s, "
    "\"caps\": {\"g.c\": m/s}}; defaults 1.0 / 0.3 when absent"
)


def _read_program(path: str) -> tuple[str, str] | int:
    try:
        return Path(path).read_text(encoding="utf-8"), path
    except (OSError, UnicodeDecodeError) as exc:
        detail = getattr(exc, "strerror", None) or str(exc)
        print(f"{path}: error E-IO: {detail}", file=sys.stderr)
        return EXIT_IO


def _compile(path: str):
    """Returns (TypedProgram, source name) or an exit code."""
    loaded = _read_program(path)
    if isinstance(loaded, int):
        return loaded
    source, name = loaded
    try:
        return typecheck(parse_source(source, name)), name
    except CompileError as exc:
        print(exc.render(name), file=sys.stderr)
        return EXIT_COMPILE


def cmd_check(args: argparse.Namespace) -> int:
    result = _compile(args.program)
    if isinstance(result, int):
        return result
    return EXIT_OK


def cmd_lint(args: argparse.Namespace) -> int:
    result = _compile(args.program)
    if isinstance(result, int):
        return result
    typed, name = result
    report = lint(typed)
    if report.warnings:
        print(report.render(name))
    return EXIT_OK


def _load_config(path: str | None) -> MonitorConfig | int:
    if path is None:
        return MonitorConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        detail = getattr(exc, "strerror", None) or str(exc)
        print(f"{path}: error E-IO: {detail}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(
            f"{path}: error E-FORMAT: invalid JSON at line {exc.lineno}: {exc.msg}",
            file=sys.stderr,
        )
        return EXIT_IO
    if not isinstance(doc, dict):
        print(f"{path}: error E-FORMAT: config must be a JSON object", file=sys.stderr)
        return EXIT_IO
    try:
        return MonitorConfig(
            nominal_speed=float(doc.get("nominal_speed", DEFAULT_NOMINAL_SPEED)),
            default_cap=float(doc.get("default_cap", DEFAULT_CAP_SPEED)),
            clause_caps={str(k): float(v) for k, v in doc.get("caps", {}).items()},
        )
    except (TypeError, ValueError, AttributeError):
        print(f"{path}: error E-FORMAT: malformed config values", file=sys.stderr)
        return EXIT_IO


def cmd_ir(args: argparse.Namespace) -> int:
    result = _compile(args.program)
    if isinstance(result, int):
        return result
    typed, name = result
    config = _load_config(args.config)
    if isinstance(config, int):
        return config
    try:
        table = lower(typed, config)
    except ConfigError as exc:
        print(exc.render(name), file=sys.stderr)
        return EXIT_COMPILE
    sys.stdout.write(table.dump())
    return EXIT_OK


def _format_trace(t: float, command) -> str:
    sounds = ",".join(command.sounds)
    fired = ",".join(f"{g}.{c}" for g, c in command.fired)
    faults = ",".join(command.faults)
    return (
        f"t={t} speed={command.speed} stop={1 if command.stop else 0} "
        f"sounds=[{sounds}] fired=[{fired}] faults=[{faults}]"
    )


def cmd_run(args: argparse.Namespace) -> int:
    result = _compile(args.program)
    if isinstance(result, int):
        return result
    typed, name = result
    config = _load_config(args.config)
    if isinstance(config, int):
        return config
    try:
        table = lower(typed, config)
    except ConfigError as exc:
        print(exc.render(name), file=sys.stderr)
        return EXIT_COMPILE
    try:
        scenario = load_scenario(args.scenario)
    except DiagnosticError as exc:
        print(exc.render(args.scenario), file=sys.stderr)
        return EXIT_IO
    return _replay(table, scenario, quiet=args.quiet)


def _replay(table, scenario: Scenario, quiet: bool) -> int:
    for i, tick in enumerate(scenario.ticks):
        command = evaluate(table, tick)
        if not quiet:
            print(_format_trace(tick.timestamp, command))
        if scenario.expected is None:
            continue
        want = scenario.expected[i]
        problems = []
        if command.stop != want.stop:
            problems.append(f"stop: expected {int(want.stop)}, got {int(command.stop)}")
        if abs(command.speed - want.speed) > SPEED_TOLERANCE:
            problems.append(f"speed: expected {want.speed}, got {command.speed}")
        if command.sounds != want.sounds:
            problems.append(
                f"sounds: expected [{','.join(want.sounds)}], got [{','.join(command.sounds)}]"
            )
        if problems:
            print(
                f"{scenario.name}: tick {i} (t={tick.timestamp}) mismatch: "
                + "; ".join(problems),
                file=sys.stderr,
            )
            return EXIT_MISMATCH
    return EXIT_OK


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psafe",
        description="Compile and replay perception-safety rule programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="tokenize, parse, and type-check a program")
    p_check.add_argument("program", help="path to a .psafe program")
    p_check.set_defaults(func=cmd_check)

    p_lint = sub.add_parser("lint", help="check plus advisory clause lint")
    p_lint.add_argument("program")
    p_lint.set_defaults(func=cmd_lint)

    p_ir = sub.add_parser("ir", help="print the lowered rule table")
    p_ir.add_argument("program")
    p_ir.add_argument("--config", help=_CONFIG_HELP)
    p_ir.set_defaults(func=cmd_ir)

    p_run = sub.add_parser("run", help="replay a scenario against a program")
    p_run.add_argument("program")
    p_run.add_argument("scenario", help="path to a scenario JSON file")
    p_run.add_argument("--config", help=_CONFIG_HELP)
    p_run.add_argument(
        "--trace",
        action="store_true",
        default=True,
        help="print one trace line per tick (the default)",
    )
    p_run.add_argument(
        "--quiet",
        action="store_true",
        help="suppress per-tick trace lines (exit logic unchanged)",
    )
    p_run.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
