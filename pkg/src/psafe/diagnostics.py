"""Source spans, diagnostics, and the error types raised across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class SourceSpan:
    """1-based line/column position plus length in characters."""

    line: int
    column: int
    length: int = 0


#: Placeholder for nodes built programmatically rather than parsed.
NO_SPAN = SourceSpan(0, 0, 0)


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: SourceSpan

    def render(self, source_name: str) -> str:
        # Stable text format relied on by golden tests:
        # <file>:<line>:<col>: <severity> <code>: <message>
        return (
            f"{source_name}:{self.span.line}:{self.span.column}: "
            f"{self.severity.value} {self.code}: {self.message}"
        )


def error(code: str, message: str, span: SourceSpan) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, message, span)


def warning(code: str, message: str, span: SourceSpan) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, message, span)


class DiagnosticError(Exception):
    """Base for failures that carry structured diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))

    def render(self, source_name: str) -> str:
        return "\n".join(d.render(source_name) for d in self.diagnostics)


class CompileError(DiagnosticError):
    """Lex, parse, or semantic errors for a rule program."""


class ConfigError(DiagnosticError):
    """Invalid monitor configuration (E-CONFIG)."""


class SnapshotError(DiagnosticError):
    """Sensor data that violates snapshot invariants (E-SNAPSHOT, E-BINS)."""


class ScenarioError(DiagnosticError):
    """Unreadable or malformed scenario input (E-IO, E-FORMAT)."""
