"""Typed columnar tables: loading from CSV / JSON records and dtype inference.

A column's dtype is one of ``number``, ``string``, ``boolean``, ``datetime``.
Inference is strict: a column is datetime only if every non-null value parses
as an ISO date, numeric only if every non-null value parses as a number, etc.
Empty CSV cells become null (None).
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import RaggedRows, UnreadableSource

DTYPES = ("number", "string", "boolean", "datetime")


@dataclass(frozen=True)
class Column:
    name: str
    dtype: str


@dataclass(frozen=True)
class DataTable:
    columns: tuple[Column, ...]
    rows: tuple[tuple, ...]
    source: str = "inline"

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def dtype(self, name: str) -> str | None:
        for col in self.columns:
            if col.name == name:
                return col.dtype
        return None

    def index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise KeyError(name)

    def values(self, name: str) -> list:
        i = self.index(name)
        return [row[i] for row in self.rows]

    def row_dicts(self) -> list[dict]:
        names = self.column_names
        return [dict(zip(names, row)) for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def _parse_bool(text: str) -> bool | None:
    low = text.strip().lower()
    if low == "true":
        return True
    if low == "false":
        return False
    return None


def _parse_number(text: str) -> int | float | None:
    stripped = text.strip()
    if not stripped:
        return None
    try:
        value = int(stripped)
        return value
    except ValueError:
        pass
    try:
        return float(stripped)
    except ValueError:
        return None


def _parse_date(text: str) -> _dt.date | None:
    try:
        return _dt.date.fromisoformat(text.strip())
    except ValueError:
        return None


def _infer_text_column(cells: list[str | None]) -> tuple[str, list]:
    """Infer dtype for a column of raw strings and convert the values."""
    present = [c for c in cells if c is not None and c != ""]
    nulled: list = [None if (c is None or c == "") else c for c in cells]
    if not present:
        return "string", nulled
    bools = [_parse_bool(c) for c in present]
    if all(b is not None for b in bools):
        return "boolean", [None if c is None else _parse_bool(c) for c in nulled]
    numbers = [_parse_number(c) for c in present]
    if all(n is not None for n in numbers):
        return "number", [None if c is None else _parse_number(c) for c in nulled]
    dates = [_parse_date(c) for c in present]
    if all(d is not None for d in dates):
        return "datetime", [None if c is None else _parse_date(c) for c in nulled]
    return "string", nulled


def _infer_json_column(cells: list) -> tuple[str, list]:
    present = [c for c in cells if c is not None]
    if not present:
        return "string", cells
    if all(isinstance(c, bool) for c in present):
        return "boolean", cells
    if all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in present):
        return "number", cells
    if all(isinstance(c, str) for c in present):
        return _infer_text_column(cells)
    # Mixed JSON types: keep as strings for stability.
    return "string", [None if c is None else json.dumps(c) if isinstance(c, (dict, list)) else str(c) for c in cells]


def _from_csv_text(text: str, source: str) -> DataTable:
    reader = csv.reader(io.StringIO(text))
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise UnreadableSource(f"{source}: {exc}") from exc
    if not rows:
        raise UnreadableSource(f"{source}: file is empty (no header row)")
    header = rows[0]
    body = rows[1:]
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise RaggedRows(f"{source}: row {i} has {len(row)} cells, expected {len(header)}")
    columns: list[Column] = []
    converted: list[list] = []
    for j, name in enumerate(header):
        dtype, values = _infer_text_column([row[j] for row in body])
        columns.append(Column(name, dtype))
        converted.append(values)
    out_rows = tuple(tuple(converted[j][i] for j in range(len(header))) for i in range(len(body)))
    return DataTable(tuple(columns), out_rows, source)


def from_records(records: list[dict], source: str = "inline") -> DataTable:
    names: list[str] = []
    for rec in records:
        if not isinstance(rec, dict):
            raise UnreadableSource(f"{source}: inline data rows must be objects, got {rec!r}")
        for key in rec:
            if key not in names:
                names.append(key)
    columns: list[Column] = []
    converted: list[list] = []
    for name in names:
        dtype, values = _infer_json_column([rec.get(name) for rec in records])
        columns.append(Column(name, dtype))
        converted.append(values)
    rows = tuple(tuple(converted[j][i] for j in range(len(names))) for i in range(len(records)))
    return DataTable(tuple(columns), rows, source)


def load_table(source) -> DataTable:
    """Load a table from a CSV/JSON path, a list of records, or a VL data block."""
    if isinstance(source, DataTable):
        return source
    if isinstance(source, list):
        return from_records(source)
    if isinstance(source, dict):
        if "values" in source and isinstance(source["values"], list):
            return from_records(source["values"])
        raise UnreadableSource(f"unsupported inline data block: keys {sorted(source)}")
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UnreadableSource(f"{path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise UnreadableSource(f"{path}: not valid UTF-8 text") from exc
    if path.suffix.lower() == ".json":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UnreadableSource(f"{path}: invalid JSON ({exc})") from exc
        if isinstance(payload, list):
            return from_records(payload, str(path))
        if isinstance(payload, dict) and isinstance(payload.get("values"), list):
            return from_records(payload["values"], str(path))
        raise UnreadableSource(f"{path}: expected an array of records")
    return _from_csv_text(text, str(path))
