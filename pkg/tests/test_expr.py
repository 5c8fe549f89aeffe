from __future__ import annotations

import pytest

from vegaeval import expr
from vegaeval.errors import MalformedDocument, TypeMismatch, UnknownField


def ev(source: str, row: dict):
    return expr.eval_expression(expr.parse_expression(source), row)


def test_arithmetic():
    assert ev("datum.b - datum.a", {"a": 1, "b": 3}) == 2
    assert ev("datum.a * 2 + 1", {"a": 4}) == 9
    assert ev("(datum.a + datum.b) / 2", {"a": 1, "b": 3}) == 2.0


def test_boolean_combination():
    assert ev('datum.a > 5 && datum.c == "x"', {"a": 9, "c": "x"}) is True
    assert ev('datum.a > 5 && datum.c == "x"', {"a": 1, "c": "x"}) is False
    assert ev('datum.a > 5 || datum.c == "x"', {"a": 1, "c": "x"}) is True
    assert ev("!(datum.a > 5)", {"a": 1}) is True


def test_unknown_field_raises():
    with pytest.raises(UnknownField):
        ev("datum.missing + 1", {"a": 1})


def test_null_propagation():
    assert ev("datum.a + 1", {"a": None}) is None
    assert ev("datum.a > 5", {"a": None}) is None
    assert ev("!datum.a", {"a": None}) is None


def test_kleene_logic_keeps_dominant_operand():
    # false && null is decidedly false; true || null decidedly true.
    assert ev("datum.f && datum.n", {"f": False, "n": None}) is False
    assert ev("datum.t || datum.n", {"t": True, "n": None}) is True
    assert ev("datum.t && datum.n", {"t": True, "n": None}) is None


def test_type_mismatch():
    with pytest.raises(TypeMismatch):
        ev('datum.a + "x"', {"a": 1})
    with pytest.raises(TypeMismatch):
        ev('datum.a < "x"', {"a": 1})


def test_equality_across_types_is_false_not_error():
    assert ev('datum.a == "1"', {"a": 1}) is False
    assert ev('datum.a != "1"', {"a": 1}) is True


def test_division_by_zero_yields_null():
    assert ev("datum.a / 0", {"a": 3}) is None


def test_bracket_field_access():
    assert ev("datum['weird name'] * 2", {"weird name": 5}) == 10


def test_string_literals_both_quotes():
    assert ev("datum.c == 'x'", {"c": "x"}) is True
    assert ev('datum.c == "x"', {"c": "x"}) is True


def test_parse_errors():
    for bad in ("datum.", "1 +", "foo(2)", "datum.a ==", "'unterminated", ""):
        with pytest.raises(MalformedDocument):
            expr.parse_expression(bad)


def test_canonical_text_round_trip():
    sources = [
        "datum.a+1",
        "datum.a > 5 && datum.b == 'x'",
        "!(datum.a < 2) || datum.b / 4 >= 1",
    ]
    for source in sources:
        ast = expr.parse_expression(source)
        canon = expr.canonical_text(ast)
        assert expr.parse_expression(canon) == ast
        # Whitespace variants normalize to the same canonical text.
        spaced = source.replace(" ", "  ").replace("+", " + ")
        assert expr.canonical_text(expr.parse_expression(spaced)) == canon


def test_rename_fields():
    ast = expr.parse_expression("datum.a + datum.b")
    renamed = expr.rename_fields(ast, {"a": "A"})
    assert expr.canonical_text(renamed) == "(datum.A + datum.b)"
    assert expr.referenced_fields(renamed) == {"A", "b"}
