"""Lowering to a flat rule table and the per-tick evaluator.

Guards are compiled once into closed evaluation form: name resolution,
overload choice, and literal-to-float conversion all happen at lowering,
so a tick is a single bounded pass over the table with no lookups and no
exceptions on in-contract snapshots.

Total-evaluation rules the compiled form and any reimplementation must
share: division by zero yields +inf (NaN for 0/0, and comparisons with
NaN are false); max/min over an empty bin selection yield 0 px.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from . import ast
from .diagnostics import NO_SPAN, ConfigError, error
from .sema import (
    SENSOR_CAMERA_DETECTIONS,
    SENSOR_CAMERA_IMAGE,
    SENSOR_LIDAR_OBJECTS,
    SENSOR_ORDER,
    DETECTION_SOURCES,
    TypedProgram,
)
from .sensors import Histogram, Image, SensorSnapshot, compute_histogram
from .units import UnitType

DEFAULT_NOMINAL_SPEED = 1.0  # m/s
DEFAULT_CAP_SPEED = 0.3  # m/s


@dataclass(frozen=True)
class MonitorConfig:
    """Speed plumbing for the monitor; not derived from any sensor.

    `clause_caps` overrides the cap per clause, keyed "g.c" by group and
    clause index in source order.
    """

    nominal_speed: float = DEFAULT_NOMINAL_SPEED
    default_cap: float = DEFAULT_CAP_SPEED
    clause_caps: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ActuationCommand:
    """Merged fail-safe output of one tick."""

    stop: bool
    speed: float
    sounds: tuple[str, ...] = ()
    fired: tuple[tuple[int, int], ...] = ()
    faults: tuple[str, ...] = ()


class _Ctx:
    """Mutable per-call evaluation slots the compiled closures read."""

    __slots__ = ("distance", "hist", "alive", "bins")

    def __init__(self) -> None:
        self.distance = 0.0
        self.hist: Histogram | None = None
        self.alive = 0
        self.bins: list[int] = []  # comprehension variable slots, by depth


_Guard = Callable[[_Ctx], bool]


@dataclass(frozen=True)
class RuleEntry:
    group_index: int
    clause_index: int
    binder_kind: str  # "exists" | "hist" | "lasers"
    guard_text: str
    actions: tuple[ast.Action, ...]
    cap_value: float
    stops: bool
    caps: bool
    sounds: tuple[str, ...]
    guard: _Guard
    detection_stream: str | None = None  # exists entries
    class_label: str | None = None  # exists entries
    hist_bins: int | None = None  # hist entries


@dataclass(frozen=True)
class RuleTable:
    """Flattened program: one entry per clause, in source order."""

    entries: tuple[RuleEntry, ...]
    nominal_speed: float
    required_sensors: frozenset[str]

    def dump(self) -> str:
        """One stable line per entry, for the `ir` command and golden tests."""
        lines = []
        for e in self.entries:
            actions = ",".join(ast.action_to_str(a) for a in e.actions)
            lines.append(
                f"g{e.group_index}.c{e.clause_index} [{e.binder_kind}] "
                f"guard={e.guard_text} actions=[{actions}] cap={e.cap_value}"
            )
        return "\n".join(lines) + ("\n" if lines else "")


# --- Lowering -----------------------------------------------------------------


def lower(typed: TypedProgram, config: MonitorConfig | None = None) -> RuleTable:
    """Flatten a checked program into an immutable rule table.

    Raises ConfigError (E-CONFIG) on bad speeds or cap keys that name a
    nonexistent clause.
    """
    config = config or MonitorConfig()
    _validate_config(typed, config)

    entries: list[RuleEntry] = []
    for g, group in enumerate(typed.program.groups):
        binder = group.binder
        for c, clause in enumerate(group.clauses):
            cap = config.clause_caps.get(f"{g}.{c}", config.default_cap)
            compiled = _compile_guard(clause.guard, typed)
            sounds = tuple(
                a.label for a in clause.actions if isinstance(a, ast.Sound)
            )
            entry = RuleEntry(
                group_index=g,
                clause_index=c,
                binder_kind=_binder_kind(binder),
                guard_text=ast.expr_to_str(clause.guard),
                actions=clause.actions,
                cap_value=cap,
                stops=any(isinstance(a, ast.Stop) for a in clause.actions),
                caps=any(isinstance(a, ast.CapSpeed) for a in clause.actions),
                sounds=sounds,
                guard=compiled,
                detection_stream=(
                    DETECTION_SOURCES[binder.sensor]
                    if isinstance(binder, ast.ExistsBinder)
                    else None
                ),
                class_label=(
                    binder.class_label if isinstance(binder, ast.ExistsBinder) else None
                ),
                hist_bins=binder.bins if isinstance(binder, ast.HistBinder) else None,
            )
            entries.append(entry)
    return RuleTable(tuple(entries), config.nominal_speed, typed.sensor_requirements)


def _binder_kind(binder: ast.Binder) -> str:
    if isinstance(binder, ast.ExistsBinder):
        return "exists"
    if isinstance(binder, ast.HistBinder):
        return "hist"
    return "lasers"


def _validate_config(typed: TypedProgram, config: MonitorConfig) -> None:
    diags = []
    if not config.nominal_speed > 0:
        diags.append(
            error("E-CONFIG", f"nominal_speed must be positive, got {config.nominal_speed}", NO_SPAN)
        )
    else:
        if not 0 < config.default_cap <= config.nominal_speed:
            diags.append(
                error(
                    "E-CONFIG",
                    f"default_cap must be in (0, nominal_speed], got {config.default_cap}",
                    NO_SPAN,
                )
            )
        shape = [len(g.clauses) for g in typed.program.groups]
        for key, cap in config.clause_caps.items():
            parts = key.split(".")
            ok = (
                len(parts) == 2
                and parts[0].isdigit()
                and parts[1].isdigit()
                and int(parts[0]) < len(shape)
                and int(parts[1]) < shape[int(parts[0])]
            )
            if not ok:
                diags.append(
                    error("E-CONFIG", f"cap key '{key}' does not name a clause", NO_SPAN)
                )
            elif not 0 < cap <= config.nominal_speed:
                diags.append(
                    error(
                        "E-CONFIG",
                        f"cap for '{key}' must be in (0, nominal_speed], got {cap}",
                        NO_SPAN,
                    )
                )
    if diags:
        raise ConfigError(diags)


# --- Guard compilation ----------------------------------------------------------


def _safe_div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0:
            return float("nan")
        return float("inf") if a > 0 else float("-inf")
    return a / b


_CMP_FNS: Mapping[ast.CmpOp, Callable[[float, float], bool]] = {
    ast.CmpOp.LT: lambda a, b: a < b,
    ast.CmpOp.LE: lambda a, b: a <= b,
    ast.CmpOp.GT: lambda a, b: a > b,
    ast.CmpOp.GE: lambda a, b: a >= b,
    ast.CmpOp.EQ: lambda a, b: a == b,
    ast.CmpOp.NE: lambda a, b: a != b,
}


class _GuardCompiler:
    """Compiles one clause guard to a closure over _Ctx slots.

    Typing has already succeeded, so dispatch here is by the checker's
    node types; any fallthrough is an internal error.
    """

    def __init__(self, typed: TypedProgram):
        self.typed = typed
        self.comp_slots: dict[str, int] = {}  # comprehension var -> ctx.bins index

    def scalar(self, node: ast.Expr) -> Callable[[_Ctx], float]:
        if isinstance(node, ast.Literal):
            value = float(node.value)
            return lambda ctx: value
        if isinstance(node, ast.Distance):
            return lambda ctx: ctx.distance
        if isinstance(node, ast.VarRef):
            if node.name in self.comp_slots:
                slot = self.comp_slots[node.name]
                return lambda ctx: ctx.bins[slot]
            raise AssertionError(f"variable '{node.name}' has no scalar value")
        if isinstance(node, ast.Compare):
            lhs, rhs = self.scalar(node.lhs), self.scalar(node.rhs)
            cmp = _CMP_FNS[node.op]
            return lambda ctx: cmp(lhs(ctx), rhs(ctx))
        if isinstance(node, ast.Arith):
            lhs, rhs = self.scalar(node.lhs), self.scalar(node.rhs)
            if node.op is ast.ArithOp.ADD:
                return lambda ctx: lhs(ctx) + rhs(ctx)
            if node.op is ast.ArithOp.SUB:
                return lambda ctx: lhs(ctx) - rhs(ctx)
            if node.op is ast.ArithOp.MUL:
                return lambda ctx: lhs(ctx) * rhs(ctx)
            return lambda ctx: _safe_div(lhs(ctx), rhs(ctx))
        if isinstance(node, ast.Aggregate):
            return self.aggregate(node)
        raise AssertionError(f"cannot compile {node!r} as a scalar")

    def aggregate(self, node: ast.Aggregate) -> Callable[[_Ctx], float]:
        fn, arg = node.fn, node.arg
        if isinstance(arg, ast.Plain):
            te = self.typed.type_of(arg.expr)
            if te is UnitType.BIN:
                return self.scalar(arg.expr)  # size(bin) is the bin's pixel count
            if te is UnitType.LASER_SET:
                return lambda ctx: ctx.alive
            collection = self.collection(arg.expr)
            if fn in (ast.AggFn.SIZE, ast.AggFn.COUNT):
                return lambda ctx: len(collection(ctx))
            if fn is ast.AggFn.MAX:
                return lambda ctx: max(collection(ctx), default=0)
            return lambda ctx: min(collection(ctx), default=0)

        assert isinstance(arg, ast.Comprehension)
        selected = self.comprehension(arg)
        if fn in (ast.AggFn.SIZE, ast.AggFn.COUNT):
            return lambda ctx: len(selected(ctx))
        if fn is ast.AggFn.MAX:
            return lambda ctx: max(selected(ctx), default=0)
        return lambda ctx: min(selected(ctx), default=0)

    def comprehension(self, comp: ast.Comprehension) -> Callable[[_Ctx], list[int]]:
        domain = self.collection(comp.domain)
        if comp.filter is None:
            return lambda ctx: list(domain(ctx))
        slot = len(self.comp_slots)
        shadowed = self.comp_slots.get(comp.var)
        self.comp_slots[comp.var] = slot
        predicate = self.scalar(comp.filter)
        if shadowed is None:
            del self.comp_slots[comp.var]
        else:
            self.comp_slots[comp.var] = shadowed

        def run(ctx: _Ctx) -> list[int]:
            while len(ctx.bins) <= slot:
                ctx.bins.append(0)
            out = []
            for count in domain(ctx):
                ctx.bins[slot] = count
                if predicate(ctx):
                    out.append(count)
            return out

        return run

    def collection(self, node: ast.Expr) -> Callable[[_Ctx], Sequence[int]]:
        t = self.typed.type_of(node)
        if t is UnitType.BIN_SET:
            return lambda ctx: ctx.hist.bin_counts  # type: ignore[union-attr]
        raise AssertionError(f"cannot compile {node!r} as a collection")


def _compile_guard(guard: ast.Expr, typed: TypedProgram) -> _Guard:
    compiled = _GuardCompiler(typed).scalar(guard)
    return lambda ctx: bool(compiled(ctx))


# --- Evaluation -----------------------------------------------------------------


def evaluate(table: RuleTable, snapshot: SensorSnapshot) -> ActuationCommand:
    """Evaluate one tick. Pure; identical inputs give identical commands.

    Fail-safe gate first: a missing required stream (or a precomputed
    histogram whose bin count cannot serve the program) forces a stop with
    fault codes and no guard evaluation. Otherwise every satisfied clause
    fires and actions merge most-restrictive-wins.
    """
    missing = [
        name
        for name in SENSOR_ORDER
        if name in table.required_sensors and _stream_absent(snapshot, name)
    ]
    if missing:
        return ActuationCommand(
            stop=True,
            speed=0.0,
            faults=tuple(f"SENSOR_MISSING:{name}" for name in missing),
        )

    hists: dict[int, Histogram] = {}
    for entry in table.entries:
        if entry.hist_bins is not None and entry.hist_bins not in hists:
            resolved = _resolve_histogram(snapshot.camera_image, entry.hist_bins)
            if resolved is None:
                return ActuationCommand(
                    stop=True,
                    speed=0.0,
                    faults=(f"HISTOGRAM_BINS_MISMATCH:{SENSOR_CAMERA_IMAGE}",),
                )
            hists[entry.hist_bins] = resolved

    ctx = _Ctx()
    parts = [ActuationCommand(stop=False, speed=table.nominal_speed)]
    for entry in table.entries:
        if _entry_fires(entry, snapshot, hists, ctx):
            parts.append(_clause_command(entry, table.nominal_speed))
    return merge(parts)


def _clause_command(entry: RuleEntry, nominal_speed: float) -> ActuationCommand:
    """The partial command one fired clause contributes to the merge."""
    if entry.stops:
        speed = 0.0
    elif entry.caps:
        speed = entry.cap_value
    else:
        speed = nominal_speed  # sound-only clauses restrict nothing
    return ActuationCommand(
        stop=entry.stops,
        speed=speed,
        sounds=entry.sounds,
        fired=((entry.group_index, entry.clause_index),),
    )


def _stream_absent(snapshot: SensorSnapshot, name: str) -> bool:
    if name == SENSOR_CAMERA_DETECTIONS:
        return snapshot.camera_detections is None
    if name == SENSOR_CAMERA_IMAGE:
        return snapshot.camera_image is None
    if name == SENSOR_LIDAR_OBJECTS:
        return snapshot.lidar_objects is None
    return snapshot.laser_alive_mask is None


def _resolve_histogram(
    image: Image | Histogram | None, bins: int
) -> Histogram | None:
    if isinstance(image, Histogram):
        return image if len(image.bin_counts) == bins else None
    assert isinstance(image, Image)  # gate already checked presence
    return compute_histogram(image, bins)


def _entry_fires(
    entry: RuleEntry,
    snapshot: SensorSnapshot,
    hists: Mapping[int, Histogram],
    ctx: _Ctx,
) -> bool:
    if entry.binder_kind == "exists":
        detections = (
            snapshot.camera_detections
            if entry.detection_stream == SENSOR_CAMERA_DETECTIONS
            else snapshot.lidar_objects
        )
        assert detections is not None
        for det in detections:
            if det.class_label != entry.class_label:
                continue
            ctx.distance = det.distance
            if entry.guard(ctx):
                return True
        return False
    if entry.binder_kind == "hist":
        assert entry.hist_bins is not None
        ctx.hist = hists[entry.hist_bins]
        return entry.guard(ctx)
    assert snapshot.laser_alive_mask is not None
    ctx.alive = snapshot.laser_alive_mask.bit_count()
    return entry.guard(ctx)


# --- Command merging --------------------------------------------------------------


def merge(commands: Iterable[ActuationCommand]) -> ActuationCommand:
    """Meet in the command lattice: stop dominates, speed is the minimum,
    sounds/fired/faults union in first-appearance order. Associative and
    idempotent; commutative up to the recorded orderings.
    """
    commands = list(commands)
    if not commands:
        raise ValueError("merge requires at least one command")
    stop = any(c.stop for c in commands)
    speed = 0.0 if stop else min(c.speed for c in commands)
    sounds: list[str] = []
    fired: list[tuple[int, int]] = []
    faults: list[str] = []
    for c in commands:
        for s in c.sounds:
            if s not in sounds:
                sounds.append(s)
        for f in c.fired:
            if f not in fired:
                fired.append(f)
        for f in c.faults:
            if f not in faults:
                faults.append(f)
    return ActuationCommand(stop, speed, tuple(sounds), tuple(fired), tuple(faults))
