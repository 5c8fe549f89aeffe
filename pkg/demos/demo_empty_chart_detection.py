#!/usr/bin/env python3
"""Walk through the transform interpreter and empty-chart detection.

Run:  python demos/demo_empty_chart_detection.py
"""

import json

from vegaeval import evaluate_chart, normalize
from vegaeval.tables import from_records

ROWS = [
    {"Origin": "Japan", "Horsepower": 95, "MPG": 30, "Year": "2006-01-01"},
    {"Origin": "Japan", "Horsepower": 115, "MPG": 34, "Year": "2007-01-01"},
    {"Origin": "USA", "Horsepower": 150, "MPG": 20, "Year": "2006-07-15"},
    {"Origin": "USA", "Horsepower": 200, "MPG": 15, "Year": "2007-03-05"},
    {"Origin": "Europe", "Horsepower": 110, "MPG": 27, "Year": "2006-05-20"},
]


def run(title: str, spec: dict):
    table = from_records(ROWS)
    evaluation = evaluate_chart(normalize(spec), table)
    print(f"\n== {title}")
    print(f"   {json.dumps(spec.get('transform', []))}")
    for line in evaluation.applied:
        print(f"   {line}")
    print(f"   rows={evaluation.row_count_after_transforms}  "
          f"empty={evaluation.empty} ({evaluation.reason})")


def main():
    base_encoding = {"x": {"field": "Origin", "type": "nominal"},
                     "y": {"field": "MPG", "aggregate": "mean", "type": "quantitative"}}

    run("aggregate by origin", {"mark": "bar", "encoding": base_encoding})

    run("the classic defect: filtering with 'JP' instead of 'Japan'",
        {"mark": "bar", "encoding": base_encoding,
         "transform": [{"filter": {"field": "Origin", "equal": "JP"}}]})

    run("the corrected filter", {
        "mark": "bar", "encoding": base_encoding,
        "transform": [{"filter": {"field": "Origin", "equal": "Japan"}}]})

    run("binning with nice-number steps", {
        "mark": "bar",
        "encoding": {"x": {"field": "Horsepower", "bin": {"maxbins": 5},
                           "type": "quantitative"},
                     "y": {"aggregate": "count", "type": "quantitative"}}})

    run("calendar grouping plus a structured datetime filter", {
        "mark": "line",
        "encoding": {"x": {"field": "Year", "timeUnit": "year", "type": "temporal"},
                     "y": {"field": "Horsepower", "aggregate": "sum",
                           "type": "quantitative"}},
        "transform": [{"filter": {"field": "Year",
                                  "range": [{"year": 2006, "month": "jan", "date": 1},
                                            {"year": 2006, "month": "dec", "date": 31}]}}]})

    run("derived columns via calculate", {
        "mark": "point",
        "encoding": {"x": {"field": "ratio", "type": "quantitative"},
                     "y": {"field": "MPG", "type": "quantitative"}},
        "transform": [{"calculate": "datum.Horsepower / datum.MPG", "as": "ratio"},
                      {"filter": {"field": "ratio", "gt": 5}}]})


if __name__ == "__main__":
    main()
