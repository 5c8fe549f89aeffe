#!/usr/bin/env python3
"""Walk through specification scoring: identity, swaps, partial credit.

Run:  python demos/demo_spec_scoring.py
"""

import json

from vegaeval import spec_score
from vegaeval.tables import from_records

REFERENCE = {
    "mark": "bar",
    "encoding": {
        "x": {"field": "Origin", "type": "nominal"},
        "y": {"field": "MPG", "aggregate": "mean", "type": "quantitative"},
        "color": {"field": "Cylinders", "type": "ordinal"},
    },
}

ROWS = [
    {"Origin": "Japan", "MPG": 30, "Cylinders": 4},
    {"Origin": "Japan", "MPG": 34, "Cylinders": 4},
    {"Origin": "USA", "MPG": 18, "Cylinders": 8},
    {"Origin": "Europe", "MPG": 27, "Cylinders": 4},
]


def show(title: str, gen: dict, utterance: str = "average mpg by origin", table=None):
    breakdown = spec_score(gen, REFERENCE, utterance, table=table)
    print(f"\n== {title}")
    print(f"   spec: {json.dumps(gen)[:90]}...")
    print(f"   encoding F2={breakdown.f_encoding:.3f}  mark={breakdown.s_mark:.2f}  "
          f"transform F2={breakdown.f_transform:.3f}")
    print(f"   swapped_axes={breakdown.swapped_axes}  empty={breakdown.empty}  "
          f"invalid={breakdown.invalid}")
    print(f"   FINAL {breakdown.final:.3f}")


def main():
    table = from_records(ROWS)
    print("Reference spec:", json.dumps(REFERENCE, indent=2))

    show("identical spec scores 1.0", REFERENCE)

    swapped = {
        "mark": "bar",
        "encoding": {
            "x": REFERENCE["encoding"]["y"],
            "y": REFERENCE["encoding"]["x"],
            "color": REFERENCE["encoding"]["color"],
        },
    }
    show("x/y swap is equivalent", swapped)

    missing_color = {
        "mark": "bar",
        "encoding": {k: v for k, v in REFERENCE["encoding"].items() if k != "color"},
    }
    show("missing color channel: high precision, lower recall", missing_color)

    wrong_mark = dict(REFERENCE, mark="line")
    show("bar vs line: mark penalized, encodings still count", wrong_mark)

    wrong_mark_mentioned = dict(REFERENCE, mark="line")
    show("same, but the user explicitly asked for a bar chart",
         wrong_mark_mentioned, utterance="bar chart of average mpg by origin")

    inline_vs_explicit = {
        "mark": "bar",
        "transform": [{"aggregate": [{"op": "mean", "field": "MPG", "as": "m"}],
                       "groupby": ["Cylinders", "Origin"]}],
        "encoding": {
            "x": {"field": "Origin", "type": "nominal"},
            "y": {"field": "m", "type": "quantitative"},
            "color": {"field": "Cylinders", "type": "ordinal"},
        },
    }
    show("explicit top-level transform == inline shorthand", inline_vs_explicit)

    empty_chart = dict(REFERENCE,
                       transform=[{"filter": {"field": "Origin", "equal": "JP"}}])
    show("filtering on 'JP' instead of 'Japan' empties the chart (heavy penalty)",
         empty_chart, table=table)

    invalid = {"mark": "sparkle"}
    show("schema-invalid specs score exactly zero", invalid)


if __name__ == "__main__":
    main()
