"""Semantic analysis: binder resolution, unit checking, and clause lint.

`typecheck` assigns every expression node exactly one unit type (identity
keyed, since structurally equal subtrees may appear in different scopes)
and computes which sensor streams the program requires at runtime.
`lint` reports threshold subsumption and statically trivial guards; it is
purely advisory and never affects evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from . import ast
from .diagnostics import CompileError, Diagnostic, SourceSpan, error, warning
from .units import (
    NUMERIC_UNITS,
    UnitType,
    add_sub_result,
    div_result,
    is_numeric,
    is_scalar,
    mul_result,
)

# Canonical sensor-stream names, in gate-check order.
SENSOR_CAMERA_DETECTIONS = "camera_detections"
SENSOR_CAMERA_IMAGE = "camera_image"
SENSOR_LIDAR_OBJECTS = "lidar_objects"
SENSOR_LASER_LIVENESS = "laser_liveness"

SENSOR_ORDER = (
    SENSOR_CAMERA_DETECTIONS,
    SENSOR_CAMERA_IMAGE,
    SENSOR_LIDAR_OBJECTS,
    SENSOR_LASER_LIVENESS,
)

#: Detection streams addressable by `exists VAR in SOURCE.all(CLASS)`.
DETECTION_SOURCES = {
    "camera": SENSOR_CAMERA_DETECTIONS,
    "laser": SENSOR_LIDAR_OBJECTS,
}

IMAGE_SOURCES = {"camera.image": SENSOR_CAMERA_IMAGE}

LASER_SELECTORS = frozenset({"alive"})

# Histogram bin counts the runtime can honor for 8-bit images.
MAX_HIST_BINS = 256


@dataclass(frozen=True)
class TypedProgram:
    """A checked program plus its per-node unit types and sensor needs."""

    program: ast.Program
    sensor_requirements: frozenset[str]
    types: Mapping[int, UnitType]  # id(expr node) -> unit type

    def type_of(self, node: ast.Expr) -> UnitType:
        return self.types[id(node)]


@dataclass(frozen=True)
class LintReport:
    warnings: tuple[Diagnostic, ...]

    def render(self, source_name: str) -> str:
        return "\n".join(w.render(source_name) for w in self.warnings)


class _Checker:
    def __init__(self, program: ast.Program):
        self.program = program
        self.types: dict[int, UnitType] = {}
        self.diagnostics: list[Diagnostic] = []
        self.requirements: set[str] = set()

    def run(self) -> TypedProgram:
        for group in self.program.groups:
            scope = self._check_binder(group.binder)
            for clause in group.clauses:
                before = len(self.diagnostics)
                t = self._infer(clause.guard, scope)
                if t is None:
                    continue
                if t is not UnitType.BOOLEAN:
                    self._error(
                        "E-GUARD",
                        f"clause guard must be boolean, found {t}",
                        clause.loc,
                    )
                elif len(self.diagnostics) == before:
                    self._assert_no_polymorphic(clause.guard)
        if self.diagnostics:
            raise CompileError(self.diagnostics)
        return TypedProgram(self.program, frozenset(self.requirements), self.types)

    def _error(self, code: str, message: str, span) -> None:
        self.diagnostics.append(error(code, message, span))

    # --- binders ---

    def _check_binder(self, binder: ast.Binder) -> dict[str, UnitType]:
        if isinstance(binder, ast.ExistsBinder):
            stream = DETECTION_SOURCES.get(binder.sensor)
            if stream is None:
                known = ", ".join(sorted(DETECTION_SOURCES))
                self._error(
                    "E-SENSOR",
                    f"unknown detection source '{binder.sensor}' (known: {known})",
                    binder.loc,
                )
            else:
                self.requirements.add(stream)
            return {binder.var: UnitType.DETECTION}
        if isinstance(binder, ast.HistBinder):
            stream = IMAGE_SOURCES.get(binder.image_source)
            if stream is None:
                self._error(
                    "E-SENSOR",
                    f"unknown image source '{binder.image_source}'",
                    binder.loc,
                )
            else:
                self.requirements.add(stream)
            if not 1 <= binder.bins <= MAX_HIST_BINS:
                self._error(
                    "E-SENSOR",
                    f"histogram bins must be in [1, {MAX_HIST_BINS}], got {binder.bins}",
                    binder.loc,
                )
            return {binder.var: UnitType.HISTOGRAM}
        if isinstance(binder, ast.LasersBinder):
            if binder.selector not in LASER_SELECTORS:
                self._error(
                    "E-SENSOR",
                    f"unknown laser selector '{binder.selector}' (known: alive)",
                    binder.loc,
                )
            else:
                self.requirements.add(SENSOR_LASER_LIVENESS)
            return {binder.var: UnitType.LASER_SET}
        raise TypeError(f"unknown binder: {binder!r}")

    # --- expressions ---

    def _set(self, node: ast.Expr, t: UnitType) -> UnitType:
        self.types[id(node)] = t
        return t

    def _infer(self, node: ast.Expr, scope: Mapping[str, UnitType]) -> UnitType | None:
        """Infer and record the node's type; None poisons enclosing checks."""
        if isinstance(node, ast.Literal):
            return self._set(node, node.unit)

        if isinstance(node, ast.VarRef):
            t = scope.get(node.name)
            if t is None:
                self._error("E-UNRESOLVED", f"unknown variable '{node.name}'", node.loc)
                return None
            return self._set(node, t)

        if isinstance(node, ast.FieldAccess):
            tb = self._infer(node.base, scope)
            if tb is None:
                return None
            if tb is UnitType.HISTOGRAM and node.field == "bins":
                return self._set(node, UnitType.BIN_SET)
            self._error(
                "E-UNRESOLVED", f"value of type {tb} has no field '{node.field}'", node.loc
            )
            return None

        if isinstance(node, ast.Distance):
            t = scope.get(node.var)
            if t is None:
                self._error("E-UNRESOLVED", f"unknown variable '{node.var}'", node.loc)
                return None
            if t is not UnitType.DETECTION:
                self._error(
                    "E-UNIT",
                    f"distance() requires a detection variable, '{node.var}' is a {t}",
                    node.loc,
                )
                return None
            return self._set(node, UnitType.METERS)

        if isinstance(node, ast.Compare):
            return self._infer_compare(node, scope)

        if isinstance(node, ast.Arith):
            return self._infer_arith(node, scope)

        if isinstance(node, ast.Aggregate):
            return self._infer_aggregate(node, scope)

        raise TypeError(f"unknown expression: {node!r}")

    def _infer_compare(self, node: ast.Compare, scope) -> UnitType | None:
        tl = self._infer(node.lhs, scope)
        tr = self._infer(node.rhs, scope)
        if tl is None or tr is None:
            return None
        if tl is UnitType.POLYMORPHIC and tr is UnitType.POLYMORPHIC:
            self._error(
                "E-UNIT",
                "cannot infer units: neither comparison side has a unit",
                node.loc,
            )
            return None
        if tl is UnitType.POLYMORPHIC:
            if not self._force(node.lhs, tr, node.loc):
                return None
            tl = tr
        elif tr is UnitType.POLYMORPHIC:
            if not self._force(node.rhs, tl, node.loc):
                return None
            tr = tl
        if not is_scalar(tl) or not is_scalar(tr):
            bad = tl if not is_scalar(tl) else tr
            self._error("E-UNIT", f"cannot compare a {bad}", node.loc)
            return None
        if tl is not tr:
            self._error("E-UNIT", f"cannot compare {tl} to {tr}", node.loc)
            return None
        if node.op not in (ast.CmpOp.EQ, ast.CmpOp.NE) and not is_numeric(tl):
            self._error(
                "E-UNIT", f"ordering comparison requires numeric units, found {tl}", node.loc
            )
            return None
        return self._set(node, UnitType.BOOLEAN)

    def _infer_arith(self, node: ast.Arith, scope) -> UnitType | None:
        tl = self._infer(node.lhs, scope)
        tr = self._infer(node.rhs, scope)
        if tl is None or tr is None:
            return None
        poly_l = tl is UnitType.POLYMORPHIC
        poly_r = tr is UnitType.POLYMORPHIC
        if poly_l and poly_r:
            return self._set(node, UnitType.POLYMORPHIC)
        if poly_l or poly_r:
            poly_node, concrete = (node.lhs, tr) if poly_l else (node.rhs, tl)
            target = self._poly_operand_target(node.op, concrete)
            if target is None:
                self._error(
                    "E-UNIT",
                    f"cannot apply '{node.op.value}' to {concrete} here",
                    node.loc,
                )
                return None
            if not self._force(poly_node, target, node.loc):
                return None
            tl, tr = (target, concrete) if poly_l else (concrete, target)
        result = self._arith_table(node.op, tl, tr)
        if result is None:
            self._error(
                "E-UNIT",
                f"cannot apply '{node.op.value}' to {tl} and {tr}",
                node.loc,
            )
            return None
        return self._set(node, result)

    @staticmethod
    def _poly_operand_target(op: ast.ArithOp, concrete: UnitType) -> UnitType | None:
        """Unit an unsuffixed operand must take beside a `concrete` one."""
        if op in (ast.ArithOp.ADD, ast.ArithOp.SUB):
            return concrete if concrete in NUMERIC_UNITS else None
        if op is ast.ArithOp.DIV:
            return concrete if concrete in (UnitType.COUNT, UnitType.FRACTION) else None
        if op is ast.ArithOp.MUL:
            return concrete if concrete is UnitType.FRACTION else None
        return None

    @staticmethod
    def _arith_table(op: ast.ArithOp, tl: UnitType, tr: UnitType) -> UnitType | None:
        if op in (ast.ArithOp.ADD, ast.ArithOp.SUB):
            return add_sub_result(tl, tr)
        if op is ast.ArithOp.MUL:
            return mul_result(tl, tr)
        return div_result(tl, tr)

    def _force(self, node: ast.Expr, unit: UnitType, use_span) -> bool:
        """Resolve a polymorphic subtree to `unit`; False on failure."""
        if unit not in NUMERIC_UNITS:
            self._error("E-UNIT", f"cannot use an untyped number as {unit}", use_span)
            return False
        current = self.types.get(id(node))
        if current is not UnitType.POLYMORPHIC:
            if current is unit:
                return True
            self._error(
                "E-UNIT", f"conflicting units for shared expression: {current} vs {unit}", use_span
            )
            return False
        if isinstance(node, ast.Literal):
            self.types[id(node)] = unit
            return True
        if isinstance(node, ast.Arith):
            if node.op in (ast.ArithOp.ADD, ast.ArithOp.SUB):
                ok = self._force(node.lhs, unit, use_span) and self._force(
                    node.rhs, unit, use_span
                )
            else:
                # A fully literal product or quotient is read as dimensionless.
                if unit is not UnitType.FRACTION:
                    self._error(
                        "E-UNIT",
                        f"untyped '{node.op.value}' of plain numbers cannot yield {unit}",
                        use_span,
                    )
                    return False
                ok = self._force(node.lhs, UnitType.FRACTION, use_span) and self._force(
                    node.rhs, UnitType.FRACTION, use_span
                )
            if ok:
                self.types[id(node)] = unit
            return ok
        raise AssertionError(f"polymorphic non-literal node: {node!r}")

    def _infer_aggregate(self, node: ast.Aggregate, scope) -> UnitType | None:
        fn = node.fn
        arg = node.arg
        if isinstance(arg, ast.Plain):
            te = self._infer(arg.expr, scope)
            if te is None:
                return None
            if te is UnitType.BIN:
                if fn is ast.AggFn.SIZE:
                    return self._set(node, UnitType.PIXELS)
                self._error(
                    "E-UNIT", f"{fn.value}() cannot be applied to a single bin", node.loc
                )
                return None
            if te is UnitType.BIN_SET:
                if fn in (ast.AggFn.SIZE, ast.AggFn.COUNT):
                    return self._set(node, UnitType.COUNT)
                return self._set(node, UnitType.PIXELS)
            if te is UnitType.LASER_SET:
                if fn in (ast.AggFn.SIZE, ast.AggFn.COUNT):
                    return self._set(node, UnitType.COUNT)
                self._error(
                    "E-UNIT",
                    f"{fn.value}() cannot be applied to a laser set",
                    node.loc,
                )
                return None
            self._error(
                "E-UNIT", f"{fn.value}() expects a bin set, bin, or laser set, found {te}", node.loc
            )
            return None

        assert isinstance(arg, ast.Comprehension)
        td = self._infer(arg.domain, scope)
        if td is None:
            return None
        if td is not UnitType.BIN_SET:
            self._error(
                "E-UNIT",
                f"comprehension domain must be a histogram bin set, found {td}",
                arg.loc,
            )
            return None
        if arg.filter is not None:
            inner = dict(scope)
            inner[arg.var] = UnitType.BIN
            tf = self._infer(arg.filter, inner)
            if tf is None:
                return None
            if tf is not UnitType.BOOLEAN:
                self._error(
                    "E-GUARD", f"comprehension filter must be boolean, found {tf}", arg.loc
                )
                return None
        if fn in (ast.AggFn.SIZE, ast.AggFn.COUNT):
            return self._set(node, UnitType.COUNT)
        return self._set(node, UnitType.PIXELS)

    def _assert_no_polymorphic(self, node: ast.Expr) -> None:
        t = self.types.get(id(node))
        if t is UnitType.POLYMORPHIC:
            self._error("E-UNIT", "unit of literal cannot be inferred from context", node.loc)
            return
        for child in _children(node):
            self._assert_no_polymorphic(child)


def _children(node: ast.Expr) -> tuple[ast.Expr, ...]:
    if isinstance(node, (ast.Compare, ast.Arith)):
        return (node.lhs, node.rhs)
    if isinstance(node, ast.FieldAccess):
        return (node.base,)
    if isinstance(node, ast.Aggregate):
        if isinstance(node.arg, ast.Plain):
            return (node.arg.expr,)
        arg = node.arg
        return (arg.domain,) if arg.filter is None else (arg.domain, arg.filter)
    return ()


def typecheck(program: ast.Program) -> TypedProgram:
    """Type-check a structurally valid Program.

    Raises CompileError carrying E-UNIT / E-UNRESOLVED / E-SENSOR / E-GUARD
    diagnostics; on success every node has a concrete unit type.
    """
    return _Checker(program).run()


# --- Lint --------------------------------------------------------------------


def _nonnegative(expr: ast.Expr) -> bool:
    """True when the expression provably never evaluates below zero."""
    if isinstance(expr, ast.Distance):
        return True  # snapshot invariant: distances >= 0
    if isinstance(expr, ast.Aggregate):
        return True  # cardinalities and pixel counts
    if isinstance(expr, ast.Literal):
        return expr.value >= 0
    if isinstance(expr, ast.Arith):
        if expr.op is ast.ArithOp.SUB:
            return False
        return _nonnegative(expr.lhs) and _nonnegative(expr.rhs)
    return False


_FLIPPED = {
    ast.CmpOp.LT: ast.CmpOp.GT,
    ast.CmpOp.LE: ast.CmpOp.GE,
    ast.CmpOp.GT: ast.CmpOp.LT,
    ast.CmpOp.GE: ast.CmpOp.LE,
    ast.CmpOp.EQ: ast.CmpOp.EQ,
    ast.CmpOp.NE: ast.CmpOp.NE,
}

_LESS_FAMILY = (ast.CmpOp.LT, ast.CmpOp.LE)
_GREATER_FAMILY = (ast.CmpOp.GT, ast.CmpOp.GE)


@dataclass(frozen=True)
class _ThresholdGuard:
    clause_index: int
    key: str  # canonical text of the non-constant side
    op: ast.CmpOp
    threshold: Fraction
    quantity_nonneg: bool
    text: str
    span: SourceSpan


def _threshold_form(clause_index: int, guard: ast.Expr) -> _ThresholdGuard | None:
    """Normalize `A op c` / `c op A` guards with a single literal threshold."""
    if not isinstance(guard, ast.Compare):
        return None
    lhs_lit = isinstance(guard.lhs, ast.Literal)
    rhs_lit = isinstance(guard.rhs, ast.Literal)
    if lhs_lit == rhs_lit:
        return None
    if rhs_lit:
        quantity, threshold, op = guard.lhs, guard.rhs, guard.op
    else:
        quantity, threshold, op = guard.rhs, guard.lhs, _FLIPPED[guard.op]
    assert isinstance(threshold, ast.Literal)
    return _ThresholdGuard(
        clause_index,
        ast.expr_to_str(quantity),
        op,
        threshold.value,
        _nonnegative(quantity),
        ast.expr_to_str(guard),
        guard.loc,
    )


def _implies(a: _ThresholdGuard, b: _ThresholdGuard) -> bool:
    """Whether guard `a` firing forces guard `b` to fire (same quantity)."""
    if a.op in _LESS_FAMILY and b.op in _LESS_FAMILY:
        if a.op is ast.CmpOp.LE and b.op is ast.CmpOp.LT:
            return a.threshold < b.threshold
        return a.threshold <= b.threshold
    if a.op in _GREATER_FAMILY and b.op in _GREATER_FAMILY:
        if a.op is ast.CmpOp.GE and b.op is ast.CmpOp.GT:
            return a.threshold > b.threshold
        return a.threshold >= b.threshold
    return False


def lint(typed: TypedProgram) -> LintReport:
    """Advisory findings over threshold guards; never affects evaluation."""
    warnings: list[Diagnostic] = []
    for group in typed.program.groups:
        forms: list[_ThresholdGuard] = []
        for idx, clause in enumerate(group.clauses):
            form = _threshold_form(idx, clause.guard)
            if form is not None:
                forms.append(form)
                warnings.extend(_trivial_guard_findings(form))
            elif isinstance(clause.guard, ast.Compare):
                warnings.extend(_constant_guard_findings(clause.guard))
        for i, a in enumerate(forms):
            for b in forms[i + 1 :]:
                if a.key != b.key:
                    continue
                fwd, back = _implies(a, b), _implies(b, a)
                if not (fwd or back):
                    continue
                if fwd and back:
                    message = (
                        f"guard '{a.text}' of clause {a.clause_index} and guard "
                        f"'{b.text}' of clause {b.clause_index} are equivalent"
                    )
                elif fwd:
                    message = (
                        f"guard '{a.text}' of clause {a.clause_index} implies guard "
                        f"'{b.text}' of clause {b.clause_index}"
                    )
                else:
                    message = (
                        f"guard '{b.text}' of clause {b.clause_index} implies guard "
                        f"'{a.text}' of clause {a.clause_index}"
                    )
                warnings.append(warning("W-SUBSUME", message, b.span))
    warnings.sort(key=lambda d: (d.span.line, d.span.column))
    return LintReport(tuple(warnings))


def _trivial_guard_findings(form: _ThresholdGuard) -> list[Diagnostic]:
    findings: list[Diagnostic] = []
    if not form.quantity_nonneg:
        return findings
    c = form.threshold
    if form.op is ast.CmpOp.LT and c <= 0:
        findings.append(
            warning(
                "W-UNREACHABLE",
                f"guard '{form.text}' can never hold: '{form.key}' is nonnegative",
                form.span,
            )
        )
    elif form.op is ast.CmpOp.LE and c < 0:
        findings.append(
            warning(
                "W-UNREACHABLE",
                f"guard '{form.text}' can never hold: '{form.key}' is nonnegative",
                form.span,
            )
        )
    elif form.op is ast.CmpOp.GT and c < 0:
        findings.append(
            warning(
                "W-CONST",
                f"guard '{form.text}' always holds: '{form.key}' is nonnegative",
                form.span,
            )
        )
    elif form.op is ast.CmpOp.GE and c <= 0:
        findings.append(
            warning(
                "W-CONST",
                f"guard '{form.text}' always holds: '{form.key}' is nonnegative",
                form.span,
            )
        )
    return findings


_CMP_EVAL = {
    ast.CmpOp.LT: lambda a, b: a < b,
    ast.CmpOp.LE: lambda a, b: a <= b,
    ast.CmpOp.GT: lambda a, b: a > b,
    ast.CmpOp.GE: lambda a, b: a >= b,
    ast.CmpOp.EQ: lambda a, b: a == b,
    ast.CmpOp.NE: lambda a, b: a != b,
}


def _constant_guard_findings(guard: ast.Compare) -> list[Diagnostic]:
    if not (isinstance(guard.lhs, ast.Literal) and isinstance(guard.rhs, ast.Literal)):
        return []
    text = ast.expr_to_str(guard)
    if _CMP_EVAL[guard.op](guard.lhs.value, guard.rhs.value):
        return [warning("W-CONST", f"guard '{text}' is constant and always holds", guard.loc)]
    return [
        warning("W-UNREACHABLE", f"guard '{text}' is constant and never holds", guard.loc)
    ]
