"""Interpret the supported transform subset against a table.

This is the execution core behind empty-chart detection: transforms run in
spec order, aggregates produce one row per group with group keys sorted, and
predicates use three-valued logic where a null verdict counts as
non-matching.  String equality is case-sensitive on purpose so that defects
like filtering on "JP" when the data says "Japan" stay detectable.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass

from . import expr as _expr
from . import predicates as _pred
from .errors import UnknownField, UnsupportedTransform
from .tables import Column, DataTable
from .vlspec import NormalizedSpec, TransformDef

_POSITIONAL_CHANNELS = ("x", "y", "theta")


@dataclass(frozen=True)
class ChartEvaluation:
    row_count_after_transforms: int
    empty: bool
    reason: str  # no_rows | all_null_positional | not_empty
    applied: tuple[str, ...] = ()


def nice_bin_step(span: float, maxbins: int) -> float:
    """Smallest step from the 1/2/5 ladder that yields at most maxbins bins."""
    if span <= 0 or maxbins < 1:
        return 1.0
    raw = span / maxbins
    exponent = math.floor(math.log10(raw))
    for base in (1.0, 2.0, 5.0, 10.0):
        step = base * (10.0 ** exponent)
        if step >= raw - 1e-12:
            return step
    return 10.0 ** (exponent + 1)


def _bin_edges(values: list[float], maxbins: int) -> tuple[float, float, int]:
    lo = min(values)
    hi = max(values)
    if lo == hi:
        return lo, 1.0, 1
    step = nice_bin_step(hi - lo, maxbins)
    start = math.floor(lo / step) * step
    count = max(1, math.ceil((hi - start) / step - 1e-12))
    return start, step, count


def _require_column(table: DataTable, name: str | None, op: str) -> int:
    if name is None or name not in table.column_names:
        raise UnknownField(f"{op} transform references unknown field {name!r}")
    return table.index(name)


def _apply_filter(table: DataTable, tdef: TransformDef) -> DataTable:
    fields = _pred.predicate_fields(tdef.predicate)
    for field in fields:
        if field not in table.column_names:
            raise UnknownField(f"filter references unknown field {field!r}")
    names = table.column_names
    kept = tuple(row for row in table.rows
                 if _pred.evaluate(tdef.predicate, dict(zip(names, row))) is True)
    return DataTable(table.columns, kept, table.source)


def _apply_calculate(table: DataTable, tdef: TransformDef) -> DataTable:
    source = tdef.params_dict()["expr"]
    ast = _expr.parse_expression(source)
    names = table.column_names
    values = [_expr.eval_expression(ast, dict(zip(names, row))) for row in table.rows]
    dtype = _infer_value_dtype(values)
    columns = table.columns + (Column(tdef.derived_field, dtype),)
    rows = tuple(row + (value,) for row, value in zip(table.rows, values))
    return DataTable(columns, rows, table.source)


def _infer_value_dtype(values: list) -> str:
    present = [v for v in values if v is not None]
    if not present:
        return "string"
    if all(isinstance(v, bool) for v in present):
        return "boolean"
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in present):
        return "number"
    if all(isinstance(v, _dt.date) for v in present):
        return "datetime"
    return "string"


def _apply_bin(table: DataTable, tdef: TransformDef) -> DataTable:
    idx = _require_column(table, tdef.field, "bin")
    maxbins = tdef.params_dict()["maxbins"]
    numeric = [row[idx] for row in table.rows
               if isinstance(row[idx], (int, float)) and not isinstance(row[idx], bool)]
    columns = table.columns + (Column(tdef.derived_field, "number"),
                               Column(tdef.end_field, "number"))
    if not numeric:
        rows = tuple(row + (None, None) for row in table.rows)
        return DataTable(columns, rows, table.source)
    start, step, count = _bin_edges(numeric, maxbins)
    out_rows = []
    for row in table.rows:
        value = row[idx]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            out_rows.append(row + (None, None))
            continue
        slot = int((value - start) // step)
        slot = min(max(slot, 0), count - 1)  # max value folds into the last bin
        lo = start + slot * step
        out_rows.append(row + (lo, lo + step))
    return DataTable(columns, tuple(out_rows), table.source)


def _apply_timeunit(table: DataTable, tdef: TransformDef) -> DataTable:
    idx = _require_column(table, tdef.field, "timeUnit")
    unit = tdef.params_dict()["unit"]
    out_values = []
    for row in table.rows:
        value = row[idx]
        if not isinstance(value, _dt.date):
            out_values.append(None)
        elif unit == "year":
            out_values.append(value.year)
        elif unit == "month":
            out_values.append(value.month)
        elif unit == "date":
            out_values.append(value.day)
        elif unit == "day":
            out_values.append(value.isoweekday() % 7)  # 0 = Sunday, Vega convention
        elif unit == "hours":
            out_values.append(getattr(value, "hour", 0))
        elif unit == "yearmonth":
            out_values.append(_dt.date(value.year, value.month, 1))
        else:
            raise UnsupportedTransform(f"unsupported time unit {unit!r}")
    dtype = "datetime" if unit == "yearmonth" else "number"
    columns = table.columns + (Column(tdef.derived_field, dtype),)
    rows = tuple(row + (value,) for row, value in zip(table.rows, out_values))
    return DataTable(columns, rows, table.source)


def _sort_key(value: object) -> tuple:
    # None sorts first; mixed-type group keys order by type name then value.
    if value is None:
        return (0, "", "")
    return (1, type(value).__name__, value)


def _aggregate_value(op: str, values: list) -> object:
    if op == "count":
        return len(values)
    numbers = [v for v in values
               if isinstance(v, (int, float)) and not isinstance(v, bool)]
    if op in ("min", "max") and not numbers:
        dates = [v for v in values if isinstance(v, _dt.date)]
        if dates:
            return min(dates) if op == "min" else max(dates)
    if not numbers:
        return None
    if op == "sum":
        return sum(numbers)
    if op == "mean":
        return sum(numbers) / len(numbers)
    if op == "median":
        ordered = sorted(numbers)
        mid = len(ordered) // 2
        if len(ordered) % 2:
            return ordered[mid]
        return (ordered[mid - 1] + ordered[mid]) / 2
    if op == "min":
        return min(numbers)
    if op == "max":
        return max(numbers)
    raise UnsupportedTransform(f"unsupported aggregate op {op!r}")


def _apply_aggregate_run(table: DataTable, run: list[TransformDef]) -> DataTable:
    group_by = run[0].group_by or ()
    for name in group_by:
        _require_column(table, name, "aggregate groupby")
    for tdef in run:
        if tdef.field is not None:
            _require_column(table, tdef.field, "aggregate")
    key_idx = [table.index(name) for name in group_by]
    groups: dict[tuple, list] = {}
    for row in table.rows:
        key = tuple(row[i] for i in key_idx)
        groups.setdefault(key, []).append(row)
    out_rows = []
    measure_values: list[list] = [[] for _ in run]
    for key in sorted(groups, key=lambda k: tuple(_sort_key(v) for v in k)):
        rows = groups[key]
        measures = []
        for j, tdef in enumerate(run):
            op = tdef.params_dict()["op"]
            if tdef.field is None:
                value = _aggregate_value("count", rows)
            else:
                idx = table.index(tdef.field)
                value = _aggregate_value(op, [r[idx] for r in rows])
            measures.append(value)
            measure_values[j].append(value)
        out_rows.append(key + tuple(measures))
    columns = tuple(Column(name, table.dtype(name)) for name in group_by) + tuple(
        Column(t.derived_field, _infer_value_dtype(measure_values[j]))
        for j, t in enumerate(run))
    return DataTable(columns, tuple(out_rows), table.source)


def _steps(transforms) -> list[list[TransformDef]]:
    """Split into execution steps; adjacent aggregates sharing a groupby form
    one step because they must run as a single grouping pass."""
    steps: list[list[TransformDef]] = []
    for tdef in transforms:
        if (tdef.op == "aggregate" and steps and steps[-1][0].op == "aggregate"
                and steps[-1][0].group_by == tdef.group_by):
            steps[-1].append(tdef)
        else:
            steps.append([tdef])
    return steps


def _apply_step(table: DataTable, step: list[TransformDef]) -> DataTable:
    tdef = step[0]
    if tdef.op == "aggregate":
        return _apply_aggregate_run(table, step)
    if tdef.op == "filter":
        return _apply_filter(table, tdef)
    if tdef.op == "calculate":
        return _apply_calculate(table, tdef)
    if tdef.op == "bin":
        return _apply_bin(table, tdef)
    if tdef.op == "timeUnit":
        return _apply_timeunit(table, tdef)
    raise UnsupportedTransform(f"unsupported transform op {tdef.op!r}")


def apply_transforms(table: DataTable, transforms) -> DataTable:
    """Apply transforms in order against an immutable input table."""
    current = table
    for step in _steps(transforms):
        current = _apply_step(current, step)
    return current


def _describe(tdef: TransformDef) -> str:
    if tdef.op == "filter":
        return f"filter({_pred.describe(tdef.predicate)})"
    if tdef.op == "aggregate":
        by = ", ".join(tdef.group_by or ())
        return f"aggregate({tdef.params_dict()['op']}({tdef.field or ''}) by [{by}])"
    if tdef.op == "bin":
        return f"bin({tdef.field}, maxbins={tdef.params_dict()['maxbins']})"
    if tdef.op == "timeUnit":
        return f"timeUnit({tdef.params_dict()['unit']}, {tdef.field})"
    return f"calculate({tdef.params_dict()['expr']} as {tdef.derived_field})"


def evaluate_chart(nspec: NormalizedSpec, table: DataTable) -> ChartEvaluation:
    """Run the spec's transforms and decide whether the chart would be empty.

    Empty means zero rows survive, or every positional-channel field (x, y,
    theta) is entirely null in the transformed result.
    """
    applied: list[str] = []
    current = table
    for step in _steps(nspec.transforms):
        before = len(current)
        current = _apply_step(current, step)
        label = "; ".join(_describe(t) for t in step)
        applied.append(f"{label}: {before} -> {len(current)} rows")

    if len(current) == 0:
        return ChartEvaluation(0, True, "no_rows", tuple(applied))

    positional = [cdef.field for cdef in nspec.encodings
                  if cdef.channel in _POSITIONAL_CHANNELS and cdef.field is not None]
    if positional:
        all_null = True
        for field in positional:
            if field not in current.column_names:
                continue  # a missing column contributes no drawable values
            if any(v is not None for v in current.values(field)):
                all_null = False
                break
        if all_null:
            return ChartEvaluation(len(current), True, "all_null_positional", tuple(applied))
    return ChartEvaluation(len(current), False, "not_empty", tuple(applied))
