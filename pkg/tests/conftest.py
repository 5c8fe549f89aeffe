"""Shared fixtures: a small cars-like dataset and spec builders."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from vegaeval.tables import from_records

DATA_DIR = Path(__file__).parent / "data"

CARS_ROWS = [
    {"Origin": "Japan", "Horsepower": 95, "MPG": 30, "Year": "2006-01-01", "Name": "a"},
    {"Origin": "Japan", "Horsepower": 115, "MPG": 34, "Year": "2007-01-01", "Name": "b"},
    {"Origin": "USA", "Horsepower": 150, "MPG": 20, "Year": "2006-07-15", "Name": "c"},
    {"Origin": "USA", "Horsepower": 200, "MPG": 15, "Year": "2007-03-05", "Name": "d"},
    {"Origin": "Europe", "Horsepower": 110, "MPG": 27, "Year": "2006-05-20", "Name": "e"},
    {"Origin": "Europe", "Horsepower": 90, "MPG": 31, "Year": "2008-02-10", "Name": "f"},
    {"Origin": "USA", "Horsepower": 130, "MPG": 22, "Year": "2008-11-30", "Name": "g"},
    {"Origin": "Japan", "Horsepower": 70, "MPG": 38, "Year": "2008-06-06", "Name": "h"},
]


@pytest.fixture
def cars_table():
    return from_records(CARS_ROWS, source="cars")


def make_spec(mark="bar", encoding=None, transform=None, **extra) -> dict:
    doc: dict = {"mark": mark}
    if encoding is not None:
        doc["encoding"] = encoding
    if transform is not None:
        doc["transform"] = transform
    doc.update(extra)
    return doc


def channel(field=None, ftype=None, **extra) -> dict:
    out: dict = {}
    if field is not None:
        out["field"] = field
    if ftype is not None:
        out["type"] = ftype
    out.update(extra)
    return out


@pytest.fixture(scope="session")
def empty_fixture_corpus():
    payload = json.loads((DATA_DIR / "empty_fixtures.json").read_text())
    return payload
