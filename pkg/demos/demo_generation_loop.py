#!/usr/bin/env python3
"""Walk through the generation feedback loop with a scripted model.

The scripted "model" first emits an invalid spec, then a valid-but-empty one,
then the corrected chart, showing how validation traces and emptiness reports
flow back into the conversation.

Run:  python demos/demo_generation_loop.py
"""

import json

from vegaeval.clients import ScriptedClient
from vegaeval.pipeline import generate_chart, run_multiturn
from vegaeval.tables import from_records

ROWS = [
    {"Origin": "Japan", "MPG": 30},
    {"Origin": "Japan", "MPG": 34},
    {"Origin": "USA", "MPG": 18},
]

GOOD = {"mark": "bar",
        "encoding": {"x": {"field": "Origin", "type": "nominal"},
                     "y": {"field": "MPG", "aggregate": "mean",
                           "type": "quantitative"}}}
EMPTY = dict(GOOD, transform=[{"filter": {"field": "Origin", "equal": "JP"}}])
INVALID = {"mark": "sparkle"}


def reply(spec, note):
    return f"```json\n{json.dumps(spec)}\n```\n{note}"


def main():
    table = from_records(ROWS)
    client = ScriptedClient([
        reply(INVALID, "Here is a sparkling chart!"),
        reply(EMPTY, "Filtered to Japanese cars."),
        reply(GOOD, "Mean MPG per origin, Japanese rows included correctly."),
    ])
    outcome = generate_chart("average mpg of japanese cars", table, client,
                             max_retries=5)
    print(f"status={outcome.status}  retries_used={outcome.retries_used}")
    for i, attempt in enumerate(outcome.attempts):
        valid = attempt.validation.valid if attempt.validation else False
        print(f"\n-- attempt {i}: valid={valid} empty={attempt.empty}")
        if attempt.feedback:
            first_line = attempt.feedback.splitlines()[0]
            print(f"   feedback sent back: {first_line}")
    print("\nfinal spec:")
    print(json.dumps(outcome.spec.parsed, indent=2))
    print(f"description: {outcome.description}")

    print("\n== multi-turn: concatenated vs simulated")
    turns = ["show mpg per origin", "average it", "bar chart please"]
    concat_client = ScriptedClient([reply(GOOD, "done")])
    run_multiturn(turns, table, concat_client, mode="concatenated")
    print(f"concatenated mode used {concat_client.calls} model call(s); "
          f"prompt line count: "
          f"{concat_client.requests[0].user_prompt.count(chr(10)) + 1}")

    sim_client = ScriptedClient([reply(GOOD, "v1"), reply(GOOD, "v2"),
                                 reply(GOOD, "v3")])
    run_multiturn(turns, table, sim_client, mode="simulated")
    print(f"simulated mode used {sim_client.calls} model calls, one per turn")


if __name__ == "__main__":
    main()
