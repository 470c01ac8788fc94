import random
from fractions import Fraction

from psafe import parse_source, pretty_print
from psafe import ast
from psafe.ast import expr_to_str, format_number
from psafe.units import UnitType

from generators import random_program


def test_demo_pretty_print_is_14_lines(demo_source):
    program = parse_source(demo_source)
    text = pretty_print(program)
    lines = [line for line in text.splitlines() if line.strip()]
    assert len(lines) == 14


def test_empty_program_pretty_prints_to_empty_text():
    assert pretty_print(ast.Program(())) == ""


def test_single_group_prints_two_lines():
    program = parse_source("lasers a in lasers(alive): count(a) < 32 { cap_speed; }")
    text = pretty_print(program)
    assert text == "lasers a in lasers(alive):\n    count(a) < 32 { cap_speed; }\n"


def test_demo_round_trip(demo_source):
    program = parse_source(demo_source)
    assert parse_source(pretty_print(program)) == program


def test_round_trip_is_stable_after_one_canonicalization(demo_source):
    first = pretty_print(parse_source(demo_source))
    assert pretty_print(parse_source(first)) == first


def test_format_number():
    assert format_number(Fraction(1)) == "1"
    assert format_number(Fraction(1000)) == "1000"
    assert format_number(Fraction(3, 10)) == "0.3"
    assert format_number(Fraction(1, 2)) == "0.5"
    assert format_number(Fraction("0.30")) == "0.3"
    assert format_number(Fraction("12.05")) == "12.05"


def test_literal_suffix_rendering():
    assert expr_to_str(ast.Literal(Fraction(1), UnitType.METERS)) == "1m"
    assert expr_to_str(ast.Literal(Fraction(1000), UnitType.PIXELS)) == "1000px"
    assert expr_to_str(ast.Literal(Fraction(3, 10), UnitType.POLYMORPHIC)) == "0.3"


def test_nested_subtraction_needs_parentheses():
    lit = lambda n: ast.Literal(Fraction(n), UnitType.METERS)
    inner = ast.Arith(ast.ArithOp.SUB, lit(2), lit(1))
    expr = ast.Arith(ast.ArithOp.SUB, ast.Distance("p"), inner)
    assert expr_to_str(expr) == "distance(p) - (2m - 1m)"
    guard = ast.Compare(ast.CmpOp.LT, expr, lit(3))
    program = ast.Program(
        (
            ast.RuleGroup(
                ast.ExistsBinder("p", "camera", "pedestrian"),
                (ast.Clause(guard, (ast.Stop(),)),),
            ),
        )
    )
    assert parse_source(pretty_print(program)) == program


def test_round_trip_on_random_programs():
    rng = random.Random(411)
    for _ in range(200):
        program = random_program(rng)
        assert parse_source(pretty_print(program)) == program


def test_structural_equality_ignores_spans(demo_source):
    spaced = demo_source.replace("    ", "        ")
    assert parse_source(spaced) == parse_source(demo_source)
