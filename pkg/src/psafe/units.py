"""Semantic unit types and the algebra the checker applies to them.

The scalar lattice is deliberately tiny: meters, pixels, count, fraction,
boolean. Structural kinds (detections, histograms, bin sets, single bins,
laser sets) exist so every expression node can carry exactly one type;
they never take part in arithmetic. POLYMORPHIC marks an unsuffixed
numeric literal whose unit is still pending unification and must never
survive checking.
"""

from __future__ import annotations

from enum import Enum


class UnitType(Enum):
    METERS = "m"
    PIXELS = "px"
    COUNT = "count"
    FRACTION = "fraction"
    BOOLEAN = "boolean"
    # Structural kinds for collection-valued expressions.
    DETECTION = "detection"
    HISTOGRAM = "histogram"
    BIN_SET = "bin set"
    BIN = "bin"
    LASER_SET = "laser set"
    # Unsuffixed literal pending unification.
    POLYMORPHIC = "polymorphic"

    def __str__(self) -> str:
        return self.value


#: Units a numeric literal suffix can denote.
SUFFIX_UNITS = {"m": UnitType.METERS, "px": UnitType.PIXELS}

#: Scalar units that support ordering and arithmetic.
NUMERIC_UNITS = frozenset(
    {UnitType.METERS, UnitType.PIXELS, UnitType.COUNT, UnitType.FRACTION}
)

SCALAR_UNITS = NUMERIC_UNITS | {UnitType.BOOLEAN}


def is_numeric(unit: UnitType) -> bool:
    return unit in NUMERIC_UNITS


def is_scalar(unit: UnitType) -> bool:
    return unit in SCALAR_UNITS


def add_sub_result(left: UnitType, right: UnitType) -> UnitType | None:
    """Unit of `left + right` / `left - right`, or None when rejected.

    Same-unit addition and subtraction is closed over the numeric scalars;
    every cross-unit combination is rejected.
    """
    if left is right and left in NUMERIC_UNITS:
        return left
    return None


def mul_result(left: UnitType, right: UnitType) -> UnitType | None:
    """Unit of `left * right`; only dimensionless products are allowed."""
    if left is UnitType.FRACTION and right is UnitType.FRACTION:
        return UnitType.FRACTION
    return None


def div_result(left: UnitType, right: UnitType) -> UnitType | None:
    """Unit of `left / right`: count ratios and fraction ratios only."""
    if left is UnitType.COUNT and right is UnitType.COUNT:
        return UnitType.FRACTION
    if left is UnitType.FRACTION and right is UnitType.FRACTION:
        return UnitType.FRACTION
    return None
