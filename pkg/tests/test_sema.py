import pytest

from psafe import CompileError, compile_source, lint, parse_source, typecheck
from psafe import ast
from psafe.units import UnitType


def codes(exc_info):
    return [d.code for d in exc_info.value.diagnostics]


def test_demo_program_typechecks(demo_typed):
    assert demo_typed.sensor_requirements == {
        "camera_detections",
        "camera_image",
        "lidar_objects",
        "laser_liveness",
    }


def test_demo_guard_types(demo_typed):
    for group in demo_typed.program.groups:
        for clause in group.clauses:
            assert demo_typed.type_of(clause.guard) is UnitType.BOOLEAN


def test_fraction_guard_shape(demo_typed):
    guard = demo_typed.program.groups[1].clauses[0].guard
    assert isinstance(guard, ast.Compare)
    assert demo_typed.type_of(guard.lhs) is UnitType.FRACTION
    assert demo_typed.type_of(guard.rhs) is UnitType.FRACTION  # 0.3 unified
    assert demo_typed.type_of(guard) is UnitType.BOOLEAN


def test_spread_guard_is_pixels(demo_typed):
    guard = demo_typed.program.groups[1].clauses[2].guard
    assert demo_typed.type_of(guard.lhs) is UnitType.PIXELS


def test_no_node_is_left_polymorphic(demo_typed):
    assert UnitType.POLYMORPHIC not in set(demo_typed.types.values())


def test_meters_vs_pixels_is_a_unit_error():
    with pytest.raises(CompileError) as exc:
        compile_source("exists p in camera.all(pedestrian): distance(p) < 1px { stop; }")
    assert codes(exc) == ["E-UNIT"]


@pytest.mark.parametrize(
    "source, code",
    [
        # unknown variable in guard
        ("exists p in camera.all(x): distance(q) < 1m { stop; }", "E-UNRESOLVED"),
        ("lasers a in lasers(alive): count(b) < 3 { stop; }", "E-UNRESOLVED"),
        # unknown field
        ("hist h = histogram(camera.image): size(h.buckets) < 3 { stop; }", "E-UNRESOLVED"),
        # unknown sensor sources and selectors
        ("exists p in radar.all(x): distance(p) < 1m { stop; }", "E-SENSOR"),
        ("hist h = histogram(lidar.image): size(h.bins) < 3 { stop; }", "E-SENSOR"),
        ("lasers a in lasers(dead): count(a) < 3 { stop; }", "E-SENSOR"),
        ("hist h = histogram(camera.image, bins = 300): size(h.bins) < 3 { stop; }", "E-SENSOR"),
        # non-boolean guard
        ("exists p in camera.all(x): distance(p) + 1m { stop; }", "E-GUARD"),
        # comparisons that cannot unify
        ("lasers a in lasers(alive): 26 < 32 { stop; }", "E-UNIT"),
        ("exists p in camera.all(x): p < 1m { stop; }", "E-UNIT"),
        ("hist h = histogram(camera.image): size(h.bins) < 1px { stop; }", "E-UNIT"),
        # cross-unit arithmetic
        ("exists p in camera.all(x): distance(p) - 1px < 1m { stop; }", "E-UNIT"),
        ("hist h = histogram(camera.image): max(x in h.bins: size(x) > 0) / size(h.bins) < 0.3 { stop; }", "E-UNIT"),
        ("exists p in camera.all(x): distance(p) / 2m < 0.5 { stop; }", "E-UNIT"),
        # aggregate misuse
        ("lasers a in lasers(alive): max(a) < 3 { stop; }", "E-UNIT"),
        ("exists p in camera.all(x): size(p) < 3 { stop; }", "E-UNIT"),
        ("hist h = histogram(camera.image): size(x in h.bins: size(x)) < 3 { stop; }", "E-GUARD"),
        ("lasers a in lasers(alive): count(x in a: size(x) > 0) < 3 { stop; }", "E-UNIT"),
        # distance over a non-detection variable
        ("hist h = histogram(camera.image): distance(h) < 1m { stop; }", "E-UNIT"),
    ],
)
def test_rejected_programs(source, code):
    with pytest.raises(CompileError) as exc:
        compile_source(source)
    assert code in codes(exc)


def test_count_over_count_division_gives_fraction():
    typed = compile_source(
        "hist h = histogram(camera.image): size(h.bins) / size(h.bins) < 0.5 { stop; }"
    )
    guard = typed.program.groups[0].clauses[0].guard
    assert typed.type_of(guard.lhs) is UnitType.FRACTION


def test_multiple_errors_are_collected():
    source = (
        "exists p in camera.all(x):\n"
        "    distance(p) < 1px { stop; }\n"
        "    distance(q) < 1m { stop; }\n"
    )
    with pytest.raises(CompileError) as exc:
        compile_source(source)
    assert sorted(codes(exc)) == ["E-UNIT", "E-UNRESOLVED"]


def test_typecheck_is_deterministic_and_idempotent(demo_source):
    program = parse_source(demo_source)
    first = typecheck(program)
    second = typecheck(program)
    assert first.sensor_requirements == second.sensor_requirements
    assert first.types == second.types


def test_diagnostic_text_format():
    with pytest.raises(CompileError) as exc:
        compile_source(
            "exists p in camera.all(pedestrian): distance(p) < 1px { stop; }",
            "rules.psafe",
        )
    line = exc.value.render("rules.psafe")
    assert line.startswith("rules.psafe:1:")
    assert ": error E-UNIT: " in line


# --- lint ---


def test_pedestrian_band_subsumption(demo_typed):
    report = lint(demo_typed)
    subsumes = [w for w in report.warnings if w.code == "W-SUBSUME"]
    pedestrian = [w for w in subsumes if "distance(p)" in w.message]
    assert len(pedestrian) == 3
    messages = "\n".join(w.message for w in pedestrian)
    assert "'distance(p) < 1m' of clause 0 implies guard 'distance(p) < 3m'" in messages
    assert "'distance(p) < 1m' of clause 0 implies guard 'distance(p) < 5m'" in messages
    assert "'distance(p) < 3m' of clause 1 implies guard 'distance(p) < 5m'" in messages


def test_single_clause_group_has_no_findings():
    typed = compile_source("lasers a in lasers(alive): count(a) < 26 { stop; }")
    assert lint(typed).warnings == ()


def test_unreachable_guard():
    typed = compile_source("exists o in laser.all(x): distance(o) < 0m { stop; }")
    report = lint(typed)
    assert [w.code for w in report.warnings] == ["W-UNREACHABLE"]


def test_constant_true_guard():
    typed = compile_source("exists o in laser.all(x): distance(o) >= 0m { stop; }")
    report = lint(typed)
    assert [w.code for w in report.warnings] == ["W-CONST"]


def test_literal_only_guard_constant_folds():
    typed = compile_source("lasers a in lasers(alive): 1m < 2m { stop; } 2m < 1m { stop; }")
    assert [w.code for w in lint(typed).warnings] == ["W-CONST", "W-UNREACHABLE"]


def test_opposite_directions_are_not_subsumption():
    typed = compile_source(
        "exists o in laser.all(x): distance(o) < 3m { stop; } distance(o) > 5m { stop; }"
    )
    assert [w for w in lint(typed).warnings if w.code == "W-SUBSUME"] == []


def test_different_quantities_are_not_compared():
    typed = compile_source(
        "hist h = histogram(camera.image):\n"
        "    size(h.bins) < 3 { stop; }\n"
        "    size(x in h.bins: size(x) > 0) < 3 { stop; }\n"
    )
    assert [w for w in lint(typed).warnings if w.code == "W-SUBSUME"] == []


def test_flipped_constant_side_is_normalized():
    typed = compile_source(
        "exists o in laser.all(x): distance(o) < 2m { stop; } 5m > distance(o) { cap_speed; }"
    )
    report = lint(typed)
    assert [w.code for w in report.warnings] == ["W-SUBSUME"]


def test_greater_family_subsumption():
    typed = compile_source(
        "exists o in laser.all(x): distance(o) > 5m { stop; } distance(o) > 3m { cap_speed; }"
    )
    report = lint(typed)
    assert [w.code for w in report.warnings] == ["W-SUBSUME"]
    assert "distance(o) > 5m" in report.warnings[0].message


def test_equivalent_guards():
    typed = compile_source(
        "exists o in laser.all(x): distance(o) < 2m { stop; } distance(o) < 2m { cap_speed; }"
    )
    report = lint(typed)
    assert len(report.warnings) == 1
    assert "equivalent" in report.warnings[0].message


def test_warnings_are_ordered_by_span(demo_typed):
    report = lint(demo_typed)
    spans = [(w.span.line, w.span.column) for w in report.warnings]
    assert spans == sorted(spans)


def test_lint_does_not_mutate_the_program(demo_typed):
    before = demo_typed.program
    lint(demo_typed)
    assert demo_typed.program == before
    assert demo_typed.program is before
