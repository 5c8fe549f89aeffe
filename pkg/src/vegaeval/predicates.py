"""Filter predicate ASTs: parsing from Vega-Lite JSON, canonical form, evaluation."""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass

from . import expr as _expr
from .errors import UnsupportedTransform

_MONTHS = ("jan", "feb", "mar", "apr", "may", "jun",
           "jul", "aug", "sep", "oct", "nov", "dec")

_COMPARISON_OPS = {"equal": "eq", "lt": "lt", "lte": "lte", "gt": "gt", "gte": "gte"}


@dataclass(frozen=True)
class DateLiteral:
    """Structured datetime literal ({"year": 2006, "month": "jan", "date": 1})."""

    year: int
    month: int | None = None
    date: int | None = None

    def as_date(self) -> _dt.date:
        return _dt.date(self.year, self.month or 1, self.date or 1)

    def to_json(self) -> dict:
        out: dict = {"year": self.year}
        if self.month is not None:
            out["month"] = _MONTHS[self.month - 1]
        if self.date is not None:
            out["date"] = self.date
        return out


@dataclass(frozen=True)
class Comparison:
    field: str
    op: str  # eq | lt | lte | gt | gte
    literal: object


@dataclass(frozen=True)
class OneOf:
    field: str
    values: tuple


@dataclass(frozen=True)
class Range:
    field: str
    lo: object
    hi: object


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Not:
    child: "PredicateAst"


@dataclass(frozen=True)
class ExprPredicate:
    source: str  # canonical expression text
    ast: _expr.ExpressionAst


PredicateAst = Comparison | OneOf | Range | And | Or | Not | ExprPredicate


def parse_month(value: object) -> int:
    if isinstance(value, int) and 1 <= value <= 12:
        return value
    if isinstance(value, str):
        key = value.strip().lower()[:3]
        if key in _MONTHS:
            return _MONTHS.index(key) + 1
    raise UnsupportedTransform(f"unsupported month value {value!r} in datetime literal")


def _parse_literal(value: object) -> object:
    if isinstance(value, dict):
        if "year" not in value:
            raise UnsupportedTransform(f"unsupported literal object {value!r} (expected a datetime)")
        month = parse_month(value["month"]) if "month" in value else None
        date = value.get("date")
        if date is not None and not isinstance(date, int):
            raise UnsupportedTransform(f"datetime 'date' must be an integer, got {date!r}")
        return DateLiteral(int(value["year"]), month, date)
    if isinstance(value, list):
        raise UnsupportedTransform("nested list literal is not supported in a predicate")
    return value


def parse_predicate(raw: object) -> PredicateAst:
    """Parse a Vega-Lite filter predicate (string expression or object form)."""
    if isinstance(raw, str):
        ast = _expr.parse_expression(raw)
        return ExprPredicate(_expr.canonical_text(ast), ast)
    if not isinstance(raw, dict):
        raise UnsupportedTransform(f"unsupported predicate {raw!r}")
    if "not" in raw:
        return Not(parse_predicate(raw["not"]))
    if "and" in raw:
        return canonicalize(And(tuple(parse_predicate(p) for p in raw["and"])))
    if "or" in raw:
        return canonicalize(Or(tuple(parse_predicate(p) for p in raw["or"])))
    if "field" not in raw:
        raise UnsupportedTransform(f"predicate needs a 'field' (or and/or/not): {raw!r}")
    field = raw["field"]
    if not isinstance(field, str):
        raise UnsupportedTransform(f"predicate field must be a string, got {field!r}")
    ops = [k for k in raw if k not in ("field",)]
    if len(ops) != 1:
        raise UnsupportedTransform(f"predicate must carry exactly one test, got {sorted(ops)}")
    key = ops[0]
    if key in _COMPARISON_OPS:
        return Comparison(field, _COMPARISON_OPS[key], _parse_literal(raw[key]))
    if key == "oneOf":
        values = raw[key]
        if not isinstance(values, list):
            raise UnsupportedTransform("'oneOf' needs a list of values")
        return OneOf(field, tuple(sorted((_parse_literal(v) for v in values), key=_sort_key)))
    if key == "range":
        bounds = raw[key]
        if not isinstance(bounds, list) or len(bounds) != 2:
            raise UnsupportedTransform("'range' needs a two-element [lo, hi] list")
        return Range(field, _parse_literal(bounds[0]), _parse_literal(bounds[1]))
    raise UnsupportedTransform(f"unsupported predicate test {key!r}")


def _sort_key(value: object) -> tuple:
    return (type(value).__name__, repr(value))


def canonical_key(pred: PredicateAst) -> str:
    """Stable string key; equal predicates have equal keys."""
    return repr(pred)


def canonicalize(pred: PredicateAst) -> PredicateAst:
    """Sort and/or children so equivalent trees compare equal."""
    if isinstance(pred, And):
        children = tuple(sorted((canonicalize(c) for c in pred.children), key=canonical_key))
        return And(children)
    if isinstance(pred, Or):
        children = tuple(sorted((canonicalize(c) for c in pred.children), key=canonical_key))
        return Or(children)
    if isinstance(pred, Not):
        return Not(canonicalize(pred.child))
    return pred


def predicate_fields(pred: PredicateAst) -> set[str]:
    if isinstance(pred, (Comparison, OneOf, Range)):
        return {pred.field}
    if isinstance(pred, (And, Or)):
        out: set[str] = set()
        for child in pred.children:
            out |= predicate_fields(child)
        return out
    if isinstance(pred, Not):
        return predicate_fields(pred.child)
    return _expr.referenced_fields(pred.ast)


def rename_fields(pred: PredicateAst, renames: dict[str, str]) -> PredicateAst:
    if isinstance(pred, Comparison):
        return Comparison(renames.get(pred.field, pred.field), pred.op, pred.literal)
    if isinstance(pred, OneOf):
        return OneOf(renames.get(pred.field, pred.field), pred.values)
    if isinstance(pred, Range):
        return Range(renames.get(pred.field, pred.field), pred.lo, pred.hi)
    if isinstance(pred, And):
        return canonicalize(And(tuple(rename_fields(c, renames) for c in pred.children)))
    if isinstance(pred, Or):
        return canonicalize(Or(tuple(rename_fields(c, renames) for c in pred.children)))
    if isinstance(pred, Not):
        return Not(rename_fields(pred.child, renames))
    ast = _expr.rename_fields(pred.ast, renames)
    return ExprPredicate(_expr.canonical_text(ast), ast)


def to_json(pred: PredicateAst) -> object:
    """Render a predicate back to Vega-Lite filter JSON."""
    if isinstance(pred, Comparison):
        key = {v: k for k, v in _COMPARISON_OPS.items()}[pred.op]
        return {"field": pred.field, key: _literal_json(pred.literal)}
    if isinstance(pred, OneOf):
        return {"field": pred.field, "oneOf": [_literal_json(v) for v in pred.values]}
    if isinstance(pred, Range):
        return {"field": pred.field, "range": [_literal_json(pred.lo), _literal_json(pred.hi)]}
    if isinstance(pred, And):
        return {"and": [to_json(c) for c in pred.children]}
    if isinstance(pred, Or):
        return {"or": [to_json(c) for c in pred.children]}
    if isinstance(pred, Not):
        return {"not": to_json(pred.child)}
    return pred.source


def _literal_json(value: object) -> object:
    if isinstance(value, DateLiteral):
        return value.to_json()
    return value


# ---------------------------------------------------------------------------
# Evaluation (three-valued: True / False / None)
# ---------------------------------------------------------------------------


def _coerce_pair(cell: object, literal: object) -> tuple[object, object] | None:
    """Align a cell value and a predicate literal for comparison, or None."""
    if isinstance(literal, DateLiteral):
        if isinstance(cell, _dt.date):
            return cell, literal.as_date()
        return None
    if isinstance(cell, bool) or isinstance(literal, bool):
        if isinstance(cell, bool) and isinstance(literal, bool):
            return cell, literal
        return None
    if isinstance(cell, (int, float)) and isinstance(literal, (int, float)):
        return cell, literal
    if isinstance(cell, str) and isinstance(literal, str):
        return cell, literal
    return None


def evaluate(pred: PredicateAst, row: dict) -> bool | None:
    """Evaluate against one row; None means the predicate is undefined (null)."""
    if isinstance(pred, Comparison):
        cell = row.get(pred.field)
        if cell is None:
            return None
        pair = _coerce_pair(cell, pred.literal)
        if pred.op == "eq":
            return pair is not None and pair[0] == pair[1]
        if pair is None:
            return None
        left, right = pair
        if pred.op == "lt":
            return left < right
        if pred.op == "lte":
            return left <= right
        if pred.op == "gt":
            return left > right
        return left >= right
    if isinstance(pred, OneOf):
        cell = row.get(pred.field)
        if cell is None:
            return None
        for value in pred.values:
            pair = _coerce_pair(cell, value)
            if pair is not None and pair[0] == pair[1]:
                return True
        return False
    if isinstance(pred, Range):
        cell = row.get(pred.field)
        if cell is None:
            return None
        if pred.lo is not None:
            pair = _coerce_pair(cell, pred.lo)
            if pair is None or pair[0] < pair[1]:
                return None if pair is None else False
        if pred.hi is not None:
            pair = _coerce_pair(cell, pred.hi)
            if pair is None or pair[0] > pair[1]:
                return None if pair is None else False
        return True
    if isinstance(pred, And):
        saw_null = False
        for child in pred.children:
            value = evaluate(child, row)
            if value is False:
                return False
            if value is None:
                saw_null = True
        return None if saw_null else True
    if isinstance(pred, Or):
        saw_null = False
        for child in pred.children:
            value = evaluate(child, row)
            if value is True:
                return True
            if value is None:
                saw_null = True
        return None if saw_null else False
    if isinstance(pred, Not):
        value = evaluate(pred.child, row)
        return None if value is None else not value
    value = _expr.eval_expression(pred.ast, row)
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    # Non-boolean expression result: truthiness of numbers/strings.
    return bool(value)


def describe(pred: PredicateAst) -> str:
    """Short human-readable form for logs."""
    if isinstance(pred, Comparison):
        symbol = {"eq": "==", "lt": "<", "lte": "<=", "gt": ">", "gte": ">="}[pred.op]
        return f"{pred.field} {symbol} {_literal_text(pred.literal)}"
    if isinstance(pred, OneOf):
        return f"{pred.field} in {{{', '.join(_literal_text(v) for v in pred.values)}}}"
    if isinstance(pred, Range):
        return f"{_literal_text(pred.lo)} <= {pred.field} <= {_literal_text(pred.hi)}"
    if isinstance(pred, And):
        return "(" + " and ".join(describe(c) for c in pred.children) + ")"
    if isinstance(pred, Or):
        return "(" + " or ".join(describe(c) for c in pred.children) + ")"
    if isinstance(pred, Not):
        return f"not {describe(pred.child)}"
    return pred.source


def _literal_text(value: object) -> str:
    if isinstance(value, DateLiteral):
        return value.as_date().isoformat()
    return json.dumps(value) if isinstance(value, str) else str(value)
