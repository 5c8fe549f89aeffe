#!/usr/bin/env python3
"""Walk through a batch evaluation: manifest, metrics, confidence intervals.

Builds a small synthetic benchmark in a temp directory, evaluates it with a
scripted generator (some examples succeed immediately, some need the feedback
loop, some stay empty), and prints the aggregated report.

Run:  python demos/demo_batch_eval.py
"""

import json
import tempfile
from dataclasses import dataclass
from pathlib import Path

from vegaeval.clients import ScriptedClient
from vegaeval.harness import load_manifest, run_eval
from vegaeval.pipeline import generate_chart

ROWS = [
    {"Origin": "Japan", "MPG": 30},
    {"Origin": "Japan", "MPG": 34},
    {"Origin": "USA", "MPG": 18},
    {"Origin": "Europe", "MPG": 27},
]
GOOD = {"mark": "bar",
        "encoding": {"x": {"field": "Origin", "type": "nominal"},
                     "y": {"field": "MPG", "aggregate": "mean",
                           "type": "quantitative"}}}
EMPTY = dict(GOOD, transform=[{"filter": {"field": "Origin", "equal": "JP"}}])
WRONG_MARK = dict(GOOD, mark="line")


def reply(spec):
    return f"```json\n{json.dumps(spec)}\n```\nchart"


@dataclass
class DemoAdapter:
    scripts: dict
    max_retries: int = 5

    def generate(self, record, table):
        client = ScriptedClient(list(self.scripts[record.id]))
        return generate_chart(record.utterance, table, client,
                              max_retries=self.max_retries)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        (tmp_path / "data.csv").write_text(
            "Origin,MPG\n" + "\n".join(f"{r['Origin']},{r['MPG']}" for r in ROWS) + "\n")
        (tmp_path / "ref.json").write_text(json.dumps(GOOD))
        rows = []
        difficulties = ["easy", "easy", "medium", "medium", "hard", "hard"]
        for i, difficulty in enumerate(difficulties):
            rows.append({"id": f"d{i}", "dataset": "custom",
                         "utterances": ["mean mpg by origin"],
                         "difficulty": difficulty,
                         "data_path": "data.csv", "reference_spec_path": "ref.json"})
        (tmp_path / "manifest.jsonl").write_text(
            "\n".join(json.dumps(r) for r in rows) + "\n")

        scripts = {
            "d0": [reply(GOOD)],                      # immediate success
            "d1": [reply(GOOD)],
            "d2": [reply(EMPTY), reply(GOOD)],        # rescued by the loop
            "d3": [reply(WRONG_MARK)],                # valid, mark mismatch
            "d4": [reply(EMPTY)] * 6,                 # stays empty
            "d5": [reply({"mark": "sparkle"})] * 6,   # stays invalid
        }
        loaded = load_manifest(tmp_path / "manifest.jsonl")
        report = run_eval(loaded, DemoAdapter(scripts),
                          metrics=("spec", "ecr", "ver"), seed=7, resamples=1000)

        print("metric    mean    95% CI            n")
        for name in sorted(report.metrics):
            s = report.metrics[name]
            print(f"{name:8s} {s.mean:6.3f}  [{s.ci.low:.3f}, {s.ci.high:.3f}]  {s.n}")

        print("\nby difficulty:")
        for group, per_metric in report.groups["difficulty"].items():
            spec = per_metric["spec"]
            print(f"  {group:8s} spec={spec.mean:.3f} (n={spec.n})")

        print("\nper-example rows:")
        for row in report.examples:
            print(f"  {row['id']}: status={row['status']:16s} spec={row['spec']:.3f} "
                  f"ecr={row['ecr']} ver={row['ver']}")
        print(f"\nprovenance: seed={report.provenance['seed']} "
              f"config={report.provenance['config_digest']}")


if __name__ == "__main__":
    main()
