"""Randomized program and snapshot generators for property tests.

Programs are built as ASTs that are well-formed and well-typed by
construction, so they can feed the round-trip, oracle-equivalence, and
monotonicity suites without a rejection loop.
"""

from __future__ import annotations

import random
from fractions import Fraction

from psafe import ast
from psafe.sensors import Detection, Histogram, Image, SensorSnapshot
from psafe.units import UnitType

CLASS_LABELS = ["pedestrian", "Objects", "cyclist", "crate"]
SOUND_LABELS = ["emergency", "move_away", "please_move_away", "horn"]

_LT_OPS = [ast.CmpOp.LT, ast.CmpOp.LE]
_ALL_OPS = [
    ast.CmpOp.LT,
    ast.CmpOp.LE,
    ast.CmpOp.GT,
    ast.CmpOp.GE,
    ast.CmpOp.EQ,
    ast.CmpOp.NE,
]


def _meters(rng: random.Random) -> ast.Literal:
    return ast.Literal(Fraction(rng.randrange(0, 80), 10), UnitType.METERS)


def _pixels(rng: random.Random) -> ast.Literal:
    return ast.Literal(Fraction(rng.randrange(0, 2000)), UnitType.PIXELS)


def _plain_int(rng: random.Random, hi: int) -> ast.Literal:
    return ast.Literal(Fraction(rng.randrange(0, hi)), UnitType.POLYMORPHIC)


def _fraction_lit(rng: random.Random) -> ast.Literal:
    return ast.Literal(Fraction(rng.randrange(0, 11), 10), UnitType.POLYMORPHIC)


def _exists_guard(rng: random.Random, var: str) -> ast.Expr:
    op = rng.choice(_ALL_OPS if rng.random() < 0.3 else _LT_OPS)
    lhs: ast.Expr = ast.Distance(var)
    if rng.random() < 0.2:
        # distance(v) - 0.5m keeps meters on both sides of the subtraction
        lhs = ast.Arith(ast.ArithOp.SUB, lhs, _meters(rng))
    return ast.Compare(op, lhs, _meters(rng))


def _bins_of(var: str) -> ast.Expr:
    return ast.FieldAccess(ast.VarRef(var), "bins")


def _bin_filter(rng: random.Random, comp_var: str) -> ast.Expr | None:
    if rng.random() < 0.2:
        return None
    threshold = (
        _pixels(rng) if rng.random() < 0.5 else _plain_int(rng, 64)
    )
    return ast.Compare(
        rng.choice(_ALL_OPS if rng.random() < 0.2 else [ast.CmpOp.GT, ast.CmpOp.GE]),
        ast.Aggregate(ast.AggFn.SIZE, ast.Plain(ast.VarRef(comp_var))),
        threshold,
    )


def _hist_guard(rng: random.Random, var: str) -> ast.Expr:
    comp_var = rng.choice(["x", "y", "b"])
    shape = rng.randrange(3)
    if shape == 0:
        # non-empty-bin fraction compared to a plain threshold
        selected = ast.Aggregate(
            ast.AggFn.SIZE,
            ast.Comprehension(comp_var, _bins_of(var), _bin_filter(rng, comp_var)),
        )
        total = ast.Aggregate(ast.AggFn.SIZE, ast.Plain(_bins_of(var)))
        return ast.Compare(
            rng.choice(_LT_OPS + [ast.CmpOp.GT, ast.CmpOp.GE]),
            ast.Arith(ast.ArithOp.DIV, selected, total),
            _fraction_lit(rng),
        )
    if shape == 1:
        # spread between the fullest and emptiest selected bins
        comp = ast.Comprehension(comp_var, _bins_of(var), _bin_filter(rng, comp_var))
        spread = ast.Arith(
            ast.ArithOp.SUB,
            ast.Aggregate(ast.AggFn.MAX, comp),
            ast.Aggregate(ast.AggFn.MIN, comp),
        )
        return ast.Compare(rng.choice(_LT_OPS), spread, _pixels(rng))
    return ast.Compare(
        rng.choice(_ALL_OPS),
        ast.Aggregate(rng.choice([ast.AggFn.SIZE, ast.AggFn.COUNT]), ast.Plain(_bins_of(var))),
        _plain_int(rng, 20),
    )


def _lasers_guard(rng: random.Random, var: str, monotone: bool) -> ast.Expr:
    ops = _LT_OPS if monotone else _ALL_OPS
    return ast.Compare(
        rng.choice(ops),
        ast.Aggregate(
            rng.choice([ast.AggFn.COUNT, ast.AggFn.SIZE]), ast.Plain(ast.VarRef(var))
        ),
        _plain_int(rng, 36),
    )


def _actions(rng: random.Random) -> tuple[ast.Action, ...]:
    pool: list[ast.Action] = [ast.Stop(), ast.CapSpeed()]
    rng.shuffle(pool)
    chosen: list[ast.Action] = [a for a in pool if rng.random() < 0.5]
    for label in rng.sample(SOUND_LABELS, k=rng.randrange(0, 3)):
        chosen.append(ast.Sound(label))
    if not chosen:
        chosen.append(rng.choice([ast.Stop(), ast.CapSpeed(), ast.Sound("emergency")]))
    rng.shuffle(chosen)
    return tuple(chosen)


def random_program(rng: random.Random, monotone: bool = False) -> ast.Program:
    """A well-typed program of 1-4 groups with 1-3 clauses each."""
    groups = []
    hist_bins_pool = [1, 2, 4, 8, 10, 16]
    for _ in range(rng.randrange(1, 5)):
        kind = rng.randrange(4)
        if kind == 0:
            binder: ast.Binder = ast.ExistsBinder(
                rng.choice(["p", "q"]), "camera", rng.choice(CLASS_LABELS)
            )
            make_guard = lambda: _exists_guard(rng, ast.binder_var(binder))
        elif kind == 1:
            binder = ast.ExistsBinder(
                rng.choice(["o", "w"]), "laser", rng.choice(CLASS_LABELS)
            )
            make_guard = lambda: _exists_guard(rng, ast.binder_var(binder))
        elif kind == 2:
            binder = ast.HistBinder(
                rng.choice(["h", "g"]),
                "camera.image",
                rng.choice(hist_bins_pool),
                rng.random() < 0.5,
            )
            make_guard = lambda: _hist_guard(rng, ast.binder_var(binder))
        else:
            binder = ast.LasersBinder(rng.choice(["a", "l"]), "alive")
            make_guard = lambda: _lasers_guard(rng, ast.binder_var(binder), monotone)
        clauses = tuple(
            ast.Clause(make_guard(), _actions(rng)) for _ in range(rng.randrange(1, 4))
        )
        groups.append(ast.RuleGroup(binder, clauses))
    return ast.Program(tuple(groups), "<generated>")


def random_image(rng: random.Random, max_side: int = 16) -> Image:
    width = rng.randrange(1, max_side + 1)
    height = rng.randrange(1, max_side + 1)
    pixels = bytes(rng.randrange(256) for _ in range(width * height))
    return Image(width, height, pixels)


def random_histogram(rng: random.Random, bins: int) -> Histogram:
    counts = [rng.randrange(0, 500) for _ in range(bins)]
    if sum(counts) == 0:
        counts[rng.randrange(bins)] = 1
    return Histogram.from_counts(counts)


def _random_detections(rng: random.Random, n: int) -> tuple[Detection, ...]:
    return tuple(
        Detection(rng.choice(CLASS_LABELS), rng.randrange(0, 90) / 10.0)
        for _ in range(n)
    )


def random_snapshot(
    rng: random.Random,
    program: ast.Program,
    timestamp: float = 0.0,
    all_streams: bool = False,
) -> SensorSnapshot:
    """Snapshot exercising the program; streams mostly present, sometimes
    dropped (unless all_streams) to hit the fail-safe gate."""
    hist_bins = [
        g.binder.bins for g in program.groups if isinstance(g.binder, ast.HistBinder)
    ]

    def present() -> bool:
        return all_streams or rng.random() > 0.1

    detections = _random_detections(rng, rng.randrange(0, 4)) if present() else None
    lidar = _random_detections(rng, rng.randrange(0, 4)) if present() else None
    image: Image | Histogram | None = None
    if present():
        roll = rng.random()
        if roll < 0.5:
            image = random_image(rng)
        elif roll < 0.9 and hist_bins:
            image = random_histogram(rng, rng.choice(hist_bins))
        else:
            # occasionally a histogram whose width fits no binder
            image = random_histogram(rng, rng.choice([3, 5, 7, 12]))
    mask = rng.getrandbits(32) if present() else None
    return SensorSnapshot(timestamp, detections, image, lidar, mask)
