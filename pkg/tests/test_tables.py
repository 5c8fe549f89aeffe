from __future__ import annotations

import datetime as dt

import pytest

from vegaeval.errors import RaggedRows, UnreadableSource
from vegaeval.tables import from_records, load_table


def test_csv_smoke(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,x\n2,y\n")
    table = load_table(path)
    assert [c.name for c in table.columns] == ["a", "b"]
    assert [c.dtype for c in table.columns] == ["number", "string"]
    assert len(table) == 2
    assert table.rows[0] == (1, "x")


def test_datetime_inference(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("d\n2006-01-01\n2007-03-05\n")
    table = load_table(path)
    assert table.columns[0].dtype == "datetime"
    assert table.rows[0][0] == dt.date(2006, 1, 1)


def test_mixed_column_stays_string(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("d\n2006-01-01\nnot-a-date\n")
    table = load_table(path)
    assert table.columns[0].dtype == "string"


def test_empty_cells_become_null(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,\n,y\n")
    table = load_table(path)
    assert table.rows[0] == (1, None)
    assert table.rows[1] == (None, "y")


def test_boolean_inference(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("f\ntrue\nFalse\n")
    table = load_table(path)
    assert table.columns[0].dtype == "boolean"
    assert table.rows[0] == (True,)


def test_ragged_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(RaggedRows):
        load_table(path)


def test_missing_file():
    with pytest.raises(UnreadableSource):
        load_table("/nonexistent/file.csv")


def test_records_inline():
    table = from_records([{"a": 1, "b": "x"}, {"a": 2, "b": "y"}])
    assert [c.dtype for c in table.columns] == ["number", "string"]


def test_records_union_of_keys():
    table = from_records([{"a": 1}, {"b": "x"}])
    assert table.column_names == ("a", "b")
    assert table.rows == ((1, None), (None, "x"))


def test_vl_inline_values_block():
    table = load_table({"values": [{"a": 1}, {"a": 2}]})
    assert len(table) == 2


def test_json_file(tmp_path):
    path = tmp_path / "t.json"
    path.write_text('[{"a": 1, "d": "2006-01-01"}, {"a": 2, "d": "2007-01-01"}]')
    table = load_table(path)
    assert table.dtype("d") == "datetime"


def test_row_dicts(tmp_path):
    table = from_records([{"a": 1, "b": "x"}])
    assert table.row_dicts() == [{"a": 1, "b": "x"}]
