"""Deterministic, no-guess repairs for common spec defects.

The catalog is intentionally small: datetime-literal normalization, aggregate
alias mapping, field-name case correction against the dataset (only when the
case-insensitive match is unique), and dropping unknown keys inside channel
definitions.  Anything the catalog cannot fix deterministically is left for
the LLM feedback loop.
"""

from __future__ import annotations

import copy
import datetime as _dt
import json
from dataclasses import dataclass

from . import expr as _expr
from . import vlspec
from .errors import MalformedDocument
from .tables import DataTable
from .vlspec import RawSpec, ValidationReport

_MONTHS = ("jan", "feb", "mar", "apr", "may", "jun",
           "jul", "aug", "sep", "oct", "nov", "dec")

_AGGREGATE_REWRITES = {"avg": "mean", "average": "mean"}


@dataclass(frozen=True)
class RepairAction:
    rule: str
    path: str
    detail: str


RepairLog = tuple[RepairAction, ...]


def _structured_date(text: str) -> dict:
    date = _dt.date.fromisoformat(text)
    return {"year": date.year, "month": _MONTHS[date.month - 1], "date": date.day}


def _is_iso_date(value: object) -> bool:
    if not isinstance(value, str) or not vlspec.ISO_DATE_RE.match(value):
        return False
    try:
        _dt.date.fromisoformat(value)
        return True
    except ValueError:
        return False


def _datetime_gate(field: object, table: DataTable | None) -> bool:
    """Rewrite only when the table cannot prove the column is non-datetime."""
    if table is None or not isinstance(field, str):
        return True
    dtype = table.dtype(field)
    return dtype is None or dtype == "datetime"


def _rewrite_predicate_dates(node: object, field: object, table: DataTable | None,
                             path: str, log: list[RepairAction]) -> object:
    if isinstance(node, dict):
        inner_field = node.get("field", field)
        out = {}
        for key, value in node.items():
            if key in ("equal", "lt", "lte", "gt", "gte") and _is_iso_date(value) \
                    and _datetime_gate(inner_field, table):
                out[key] = _structured_date(value)
                log.append(RepairAction("datetime", f"{path}.{key}",
                                        f"{value!r} -> structured datetime"))
            elif key in ("oneOf", "range") and isinstance(value, list):
                new_list = []
                for i, item in enumerate(value):
                    if _is_iso_date(item) and _datetime_gate(inner_field, table):
                        new_list.append(_structured_date(item))
                        log.append(RepairAction("datetime", f"{path}.{key}[{i}]",
                                                f"{item!r} -> structured datetime"))
                    else:
                        new_list.append(item)
                out[key] = new_list
            elif key in ("and", "or") and isinstance(value, list):
                out[key] = [_rewrite_predicate_dates(child, inner_field, table,
                                                     f"{path}.{key}[{i}]", log)
                            for i, child in enumerate(value)]
            elif key == "not":
                out[key] = _rewrite_predicate_dates(value, inner_field, table,
                                                    f"{path}.not", log)
            else:
                out[key] = value
        return out
    return node


def repair_datetime(spec: RawSpec | dict, table: DataTable | None = None) -> RawSpec:
    """Rewrite ISO date strings in filter predicates to the structured form.

    ``"2006-01-01"`` becomes ``{"year": 2006, "month": "jan", "date": 1}``.
    Idempotent; literals that already use the structured form, and non-date
    strings, are left untouched.
    """
    repaired, _ = _repair_datetime_logged(spec, table)
    return repaired


def _repair_datetime_logged(spec, table) -> tuple[RawSpec, list[RepairAction]]:
    doc = copy.deepcopy(spec.parsed if isinstance(spec, RawSpec) else spec)
    log: list[RepairAction] = []
    if isinstance(doc, dict):
        for i, entry in enumerate(doc.get("transform", []) or []):
            if isinstance(entry, dict) and "filter" in entry:
                entry["filter"] = _rewrite_predicate_dates(
                    entry["filter"], None, table, f"$.transform[{i}].filter", log)
    return RawSpec.from_value(doc), log


def _case_map(table: DataTable) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for name in table.column_names:
        out.setdefault(name.lower(), []).append(name)
    return out


def _fix_field_case(field: object, table: DataTable, case_map: dict[str, list[str]],
                    derived: set[str]) -> str | None:
    """Return the corrected column name, or None when no unique fix exists."""
    if not isinstance(field, str) or field in table.column_names or field in derived:
        return None
    candidates = case_map.get(field.lower(), [])
    if len(candidates) == 1:
        return candidates[0]
    return None


def _derived_names(doc: dict) -> set[str]:
    """Output names produced by transforms: these are not dataset columns."""
    out: set[str] = set()
    for entry in doc.get("transform", []) or []:
        if not isinstance(entry, dict):
            continue
        as_value = entry.get("as")
        if isinstance(as_value, str):
            out.add(as_value)
            if "bin" in entry:
                out.add(f"{as_value}_end")
        elif isinstance(as_value, list):
            out.update(a for a in as_value if isinstance(a, str))
        for measure in entry.get("aggregate", []) if isinstance(entry.get("aggregate"), list) else []:
            if isinstance(measure, dict) and isinstance(measure.get("as"), str):
                out.add(measure["as"])
    return out


def repair_known_defects(spec: RawSpec | dict,
                         report: ValidationReport | None = None,
                         table: DataTable | None = None) -> tuple[RawSpec, RepairLog]:
    """Apply the deterministic repair catalog and log every applied rule.

    Never introduces new schema errors; a spec with no catalog defects comes
    back unchanged with an empty log.
    """
    doc = copy.deepcopy(spec.parsed if isinstance(spec, RawSpec) else spec)
    log: list[RepairAction] = []
    if not isinstance(doc, dict):
        return RawSpec.from_value(doc), ()

    repaired, date_log = _repair_datetime_logged(doc, table)
    doc = repaired.parsed
    log.extend(date_log)

    _repair_aggregate_aliases(doc, log)
    if table is not None:
        _repair_field_case(doc, table, log)
    _drop_unknown_channel_keys(doc, log)
    return RawSpec.from_value(doc), tuple(log)


def _repair_aggregate_aliases(doc: dict, log: list[RepairAction]) -> None:
    enc = doc.get("encoding")
    if isinstance(enc, dict):
        for channel, cdef in enc.items():
            if isinstance(cdef, dict) and cdef.get("aggregate") in _AGGREGATE_REWRITES:
                fixed = _AGGREGATE_REWRITES[cdef["aggregate"]]
                log.append(RepairAction("aggregate_alias", f"$.encoding.{channel}.aggregate",
                                        f"{cdef['aggregate']!r} -> {fixed!r}"))
                cdef["aggregate"] = fixed
    for i, entry in enumerate(doc.get("transform", []) or []):
        if isinstance(entry, dict) and isinstance(entry.get("aggregate"), list):
            for j, measure in enumerate(entry["aggregate"]):
                if isinstance(measure, dict) and measure.get("op") in _AGGREGATE_REWRITES:
                    fixed = _AGGREGATE_REWRITES[measure["op"]]
                    log.append(RepairAction(
                        "aggregate_alias", f"$.transform[{i}].aggregate[{j}].op",
                        f"{measure['op']!r} -> {fixed!r}"))
                    measure["op"] = fixed


def _repair_field_case(doc: dict, table: DataTable, log: list[RepairAction]) -> None:
    case_map = _case_map(table)
    derived = _derived_names(doc)

    def fix(container: dict, key: str, path: str) -> None:
        corrected = _fix_field_case(container.get(key), table, case_map, derived)
        if corrected is not None:
            log.append(RepairAction("field_case", path,
                                    f"{container[key]!r} -> {corrected!r}"))
            container[key] = corrected

    enc = doc.get("encoding")
    if isinstance(enc, dict):
        for channel, cdef in enc.items():
            if isinstance(cdef, dict):
                fix(cdef, "field", f"$.encoding.{channel}.field")
    for i, entry in enumerate(doc.get("transform", []) or []):
        if not isinstance(entry, dict):
            continue
        path = f"$.transform[{i}]"
        fix(entry, "field", f"{path}.field")
        if isinstance(entry.get("groupby"), list):
            for j in range(len(entry["groupby"])):
                corrected = _fix_field_case(entry["groupby"][j], table, case_map, derived)
                if corrected is not None:
                    log.append(RepairAction("field_case", f"{path}.groupby[{j}]",
                                            f"{entry['groupby'][j]!r} -> {corrected!r}"))
                    entry["groupby"][j] = corrected
        if isinstance(entry.get("aggregate"), list):
            for j, measure in enumerate(entry["aggregate"]):
                if isinstance(measure, dict):
                    fix(measure, "field", f"{path}.aggregate[{j}].field")
        if "filter" in entry:
            entry["filter"] = _fix_predicate_case(entry["filter"], table, case_map,
                                                  derived, f"{path}.filter", log)
        if isinstance(entry.get("calculate"), str):
            _fix_expression_case(entry, table, case_map, derived, f"{path}.calculate", log)


def _fix_predicate_case(node: object, table: DataTable, case_map, derived,
                        path: str, log: list[RepairAction]) -> object:
    if isinstance(node, dict):
        out = dict(node)
        corrected = _fix_field_case(out.get("field"), table, case_map, derived)
        if corrected is not None:
            log.append(RepairAction("field_case", f"{path}.field",
                                    f"{out['field']!r} -> {corrected!r}"))
            out["field"] = corrected
        for key in ("and", "or"):
            if isinstance(out.get(key), list):
                out[key] = [_fix_predicate_case(child, table, case_map, derived,
                                                f"{path}.{key}[{i}]", log)
                            for i, child in enumerate(out[key])]
        if "not" in out:
            out["not"] = _fix_predicate_case(out["not"], table, case_map, derived,
                                             f"{path}.not", log)
        return out
    if isinstance(node, str):
        return _fix_expression_text(node, table, case_map, derived, path, log)
    return node


def _fix_expression_case(entry: dict, table: DataTable, case_map, derived,
                         path: str, log: list[RepairAction]) -> None:
    entry["calculate"] = _fix_expression_text(entry["calculate"], table, case_map,
                                              derived, path, log)


def _fix_expression_text(source: str, table: DataTable, case_map, derived,
                         path: str, log: list[RepairAction]) -> str:
    try:
        ast = _expr.parse_expression(source)
    except MalformedDocument:
        return source
    renames: dict[str, str] = {}
    for name in _expr.referenced_fields(ast):
        corrected = _fix_field_case(name, table, case_map, derived)
        if corrected is not None:
            renames[name] = corrected
    if not renames:
        return source
    for old, new in sorted(renames.items()):
        log.append(RepairAction("field_case", path, f"{old!r} -> {new!r}"))
    return _expr.canonical_text(_expr.rename_fields(ast, renames))


def _drop_unknown_channel_keys(doc: dict, log: list[RepairAction]) -> None:
    enc = doc.get("encoding")
    if not isinstance(enc, dict):
        return
    schema = vlspec.subset_schema()
    allowed = set(schema["channel_def_keys"]) | set(schema["channel_stylistic_keys"])
    for channel, cdef in enc.items():
        if channel not in schema["channels"] or not isinstance(cdef, dict):
            continue
        for key in [k for k in cdef if k not in allowed]:
            log.append(RepairAction("drop_unknown_key", f"$.encoding.{channel}.{key}",
                                    f"dropped {key!r}={json.dumps(cdef[key])}"))
            del cdef[key]
