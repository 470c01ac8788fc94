"""AST for safety-rule programs, plus the canonical pretty-printer.

All nodes are immutable after construction and safe to share across
threads. Structural equality ignores source spans so that a program and
its re-parsed pretty-print compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .diagnostics import NO_SPAN, SourceSpan
from .units import UnitType


class CmpOp(Enum):
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    EQ = "="
    NE = "!="


class ArithOp(Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"


class AggFn(Enum):
    SIZE = "size"
    COUNT = "count"
    MAX = "max"
    MIN = "min"


# --- Expressions -----------------------------------------------------------


class Expr:
    """Base class for guard expressions."""

    __slots__ = ()


@dataclass(frozen=True)
class Literal(Expr):
    """Numeric literal; exact rational until lowering converts to float.

    `unit` is POLYMORPHIC for unsuffixed literals; the checker unifies it
    with exactly one unit at the use site.
    """

    value: Fraction
    unit: UnitType
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Compare(Expr):
    op: CmpOp
    lhs: Expr
    rhs: Expr
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Arith(Expr):
    op: ArithOp
    lhs: Expr
    rhs: Expr
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Distance(Expr):
    var: str
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class VarRef(Expr):
    name: str
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class FieldAccess(Expr):
    base: Expr
    field: str
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


# --- Set expressions (aggregate arguments) ---------------------------------


class SetExpr:
    __slots__ = ()


@dataclass(frozen=True)
class Plain(SetExpr):
    expr: Expr


@dataclass(frozen=True)
class Comprehension(SetExpr):
    """`var in domain: filter`; var scopes only the filter."""

    var: str
    domain: Expr
    filter: Expr | None
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Aggregate(Expr):
    fn: AggFn
    arg: SetExpr
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


# --- Actions ----------------------------------------------------------------


class Action:
    __slots__ = ()


@dataclass(frozen=True)
class Stop(Action):
    pass


@dataclass(frozen=True)
class CapSpeed(Action):
    pass


@dataclass(frozen=True)
class Sound(Action):
    label: str


# --- Binders, clauses, groups -----------------------------------------------


class Binder:
    __slots__ = ()


@dataclass(frozen=True)
class ExistsBinder(Binder):
    """`exists VAR in SENSOR.all(CLASS)`; VAR ranges over detections."""

    var: str
    sensor: str
    class_label: str
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class HistBinder(Binder):
    """`hist VAR = histogram(SOURCE, bins = N, normalized = B)`."""

    var: str
    image_source: str
    bins: int = 10
    normalized: bool = False
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class LasersBinder(Binder):
    """`lasers VAR in lasers(SELECTOR)`; VAR is the set of alive beams."""

    var: str
    selector: str
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Clause:
    guard: Expr
    actions: tuple[Action, ...]
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class RuleGroup:
    binder: Binder
    clauses: tuple[Clause, ...]
    loc: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Program:
    groups: tuple[RuleGroup, ...]
    source_name: str = field(default="<memory>", compare=False)


def binder_var(binder: Binder) -> str:
    if isinstance(binder, ExistsBinder):
        return binder.var
    if isinstance(binder, HistBinder):
        return binder.var
    if isinstance(binder, LasersBinder):
        return binder.var
    raise TypeError(f"unknown binder: {binder!r}")


# --- Canonical rendering -----------------------------------------------------

# Precedence levels: comparison < additive < multiplicative < atom.
_PREC_CMP, _PREC_ADD, _PREC_MUL, _PREC_ATOM = 1, 2, 3, 4


def format_number(value: Fraction) -> str:
    """Render an exact rational as its shortest decimal form.

    Parsed literals always have a power-of-ten denominator, so a finite
    decimal expansion exists; other rationals fall back to `num/den`.
    """
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    k = 0
    while den % 2 == 0:
        den //= 2
        k += 1
    fives = 0
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    k = max(k, fives)
    scaled = value.numerator * 10**k // value.denominator
    digits = str(abs(scaled)).rjust(k + 1, "0")
    sign = "-" if scaled < 0 else ""
    whole, frac = digits[:-k], digits[-k:]
    frac = frac.rstrip("0")
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


def _expr_prec(expr: Expr) -> int:
    if isinstance(expr, Compare):
        return _PREC_CMP
    if isinstance(expr, Arith):
        return _PREC_ADD if expr.op in (ArithOp.ADD, ArithOp.SUB) else _PREC_MUL
    return _PREC_ATOM


def expr_to_str(expr: Expr) -> str:
    """Canonical text of an expression; re-parses to an equal node."""
    if isinstance(expr, Literal):
        suffix = {UnitType.METERS: "m", UnitType.PIXELS: "px"}.get(expr.unit, "")
        return format_number(expr.value) + suffix
    if isinstance(expr, Distance):
        return f"distance({expr.var})"
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, FieldAccess):
        return f"{expr_to_str(expr.base)}.{expr.field}"
    if isinstance(expr, Aggregate):
        return f"{expr.fn.value}({_setexpr_to_str(expr.arg)})"
    if isinstance(expr, (Compare, Arith)):
        prec = _expr_prec(expr)
        lhs = _child_to_str(expr.lhs, prec, right=False)
        rhs = _child_to_str(expr.rhs, prec, right=True)
        return f"{lhs} {expr.op.value} {rhs}"
    raise TypeError(f"unknown expression: {expr!r}")


def _child_to_str(child: Expr, parent_prec: int, right: bool) -> str:
    text = expr_to_str(child)
    child_prec = _expr_prec(child)
    # Binary operators are left-associative; a right child at the same
    # precedence level needs grouping to survive a round trip.
    if child_prec < parent_prec or (right and child_prec == parent_prec):
        return f"({text})"
    return text


def _setexpr_to_str(setexpr: SetExpr) -> str:
    if isinstance(setexpr, Plain):
        return expr_to_str(setexpr.expr)
    if isinstance(setexpr, Comprehension):
        head = f"{setexpr.var} in {expr_to_str(setexpr.domain)}"
        if setexpr.filter is None:
            return head
        return f"{head}: {expr_to_str(setexpr.filter)}"
    raise TypeError(f"unknown set expression: {setexpr!r}")


def action_to_str(action: Action) -> str:
    if isinstance(action, Stop):
        return "stop"
    if isinstance(action, CapSpeed):
        return "cap_speed"
    if isinstance(action, Sound):
        return f"sound {action.label}"
    raise TypeError(f"unknown action: {action!r}")


def _binder_to_str(binder: Binder) -> str:
    if isinstance(binder, ExistsBinder):
        return f"exists {binder.var} in {binder.sensor}.all({binder.class_label})"
    if isinstance(binder, HistBinder):
        flag = "true" if binder.normalized else "false"
        return (
            f"hist {binder.var} = histogram({binder.image_source}, "
            f"bins = {binder.bins}, normalized = {flag})"
        )
    if isinstance(binder, LasersBinder):
        return f"lasers {binder.var} in lasers({binder.selector})"
    raise TypeError(f"unknown binder: {binder!r}")


def pretty_print(program: Program) -> str:
    """Canonical form: header per group, one 4-space-indented clause per line,
    `;`-separated actions with a trailing `;`. Empty program gives empty text.
    """
    lines: list[str] = []
    for group in program.groups:
        lines.append(_binder_to_str(group.binder) + ":")
        for clause in group.clauses:
            actions = " ".join(action_to_str(a) + ";" for a in clause.actions)
            lines.append(f"    {expr_to_str(clause.guard)} {{ {actions} }}")
    return "\n".join(lines) + ("\n" if lines else "")
