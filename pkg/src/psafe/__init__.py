"""psafe: a small rule language for perception-based safety monitors.

Programs bind variables over sensor streams (camera detections, image
histograms, lidar objects, laser liveness) and attach guarded fail-safe
actions. The pipeline is tokenize -> parse -> typecheck -> lower, and the
resulting rule table is evaluated once per sensor snapshot to produce a
merged actuation command.
"""

from .ast import Program, pretty_print
from .diagnostics import (
    CompileError,
    ConfigError,
    Diagnostic,
    DiagnosticError,
    ScenarioError,
    Severity,
    SnapshotError,
    SourceSpan,
)
from .lexer import Token, TokenKind, tokenize
from .parser import parse, parse_source
from .runtime import (
    ActuationCommand,
    MonitorConfig,
    RuleTable,
    evaluate,
    lower,
    merge,
)
from .sema import LintReport, TypedProgram, lint, typecheck
from .sensors import (
    Detection,
    ExpectedTick,
    Histogram,
    Image,
    Scenario,
    SensorSnapshot,
    compute_histogram,
    dump_scenario,
    load_scenario,
    read_pgm,
    validate_snapshot,
)
from .units import UnitType

__version__ = "0.1.0"


def compile_source(source: str, source_name: str = "<memory>") -> TypedProgram:
    """Tokenize, parse, and type-check in one step."""
    return typecheck(parse_source(source, source_name))


__all__ = [
    "ActuationCommand",
    "CompileError",
    "ConfigError",
    "Detection",
    "Diagnostic",
    "DiagnosticError",
    "ExpectedTick",
    "Histogram",
    "Image",
    "LintReport",
    "MonitorConfig",
    "Program",
    "RuleTable",
    "Scenario",
    "ScenarioError",
    "SensorSnapshot",
    "Severity",
    "SnapshotError",
    "SourceSpan",
    "Token",
    "TokenKind",
    "TypedProgram",
    "UnitType",
    "compile_source",
    "compute_histogram",
    "dump_scenario",
    "evaluate",
    "lint",
    "load_scenario",
    "lower",
    "merge",
    "parse",
    "parse_source",
    "pretty_print",
    "read_pgm",
    "tokenize",
    "typecheck",
    "validate_snapshot",
]
