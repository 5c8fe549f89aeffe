"""Command-line interface.

Subcommands: score-spec, ecr, judge, generate, eval, ra-bench, learn-weights,
correlate.  Scores of zero still exit 0; only I/O and usage errors are
nonzero.  Offline runs use ``--provider mock`` with a transcript file; live
runs read the endpoint configuration from the environment.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import dataflow, harness, pipeline, specscore, stats, vlspec
from .clients import HttpClient, RecordingClient, TranscriptClient
from .errors import VegaEvalError
from .judge import (
    JudgeFailure,
    aggregate_vision,
    build_mpb_request,
    build_sevq_request,
    build_vision_request,
    judge_with_retry,
    mpb_verdict,
    parse_sevq_response,
    parse_vision_response,
)
from .pipeline import RequestAnalysis
from .specscore import SpecScoreWeights
from .tables import load_table


def _read_spec(path: str) -> vlspec.RawSpec:
    return vlspec.parse_spec(Path(path).read_text(encoding="utf-8"))


def _client(args):
    if args.provider == "mock":
        if not getattr(args, "transcript", None):
            raise VegaEvalError("--provider mock needs --transcript")
        return TranscriptClient.from_file(args.transcript)
    live = HttpClient()
    if getattr(args, "transcript", None):
        # Live sessions record into the same replayable format the mock reads.
        return RecordingClient(live, args.transcript)
    return live


def _emit(payload: dict, as_json: bool, human_lines) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_score_spec(args) -> int:
    generated = _read_spec(args.generated)
    reference = _read_spec(args.reference)
    table = load_table(args.data) if args.data else None
    weights = None
    if args.weights:
        weights = SpecScoreWeights(**json.loads(Path(args.weights).read_text()))
    breakdown = specscore.spec_score(generated, reference, args.utterance or "",
                                     table=table, weights=weights)
    payload = breakdown.to_dict()
    _emit(payload, args.json, [
        f"final        {breakdown.final:.4f}",
        f"encoding     {breakdown.f_encoding:.4f}",
        f"mark         {breakdown.s_mark:.4f}",
        f"transform    {breakdown.f_transform:.4f}",
        f"validity     {breakdown.validity_bonus:.4f}",
        f"invalid      {breakdown.invalid}",
        f"empty        {breakdown.empty}",
        f"swapped_axes {breakdown.swapped_axes}",
    ])
    return 0


def cmd_ecr(args) -> int:
    spec = _read_spec(args.spec)
    table = load_table(args.data)
    report = vlspec.validate_schema(spec)
    if not report.valid:
        payload = {"empty": True, "reason": "invalid_spec",
                   "row_count_after_transforms": 0,
                   "trace": report.trace_text}
        _emit(payload, args.json, ["empty: true (spec failed validation)",
                                   report.trace_text])
        return 0
    evaluation = dataflow.evaluate_chart(vlspec.normalize(spec), table)
    payload = {"empty": evaluation.empty, "reason": evaluation.reason,
               "row_count_after_transforms": evaluation.row_count_after_transforms,
               "applied": list(evaluation.applied)}
    _emit(payload, args.json, [
        f"empty: {str(evaluation.empty).lower()} ({evaluation.reason})",
        f"rows after transforms: {evaluation.row_count_after_transforms}",
        *[f"  {line}" for line in evaluation.applied],
    ])
    return 0


def cmd_judge(args) -> int:
    client = _client(args)
    gen_img = Path(args.generated).read_bytes()
    if args.kind == "vision":
        request = build_vision_request(gen_img, Path(args.reference).read_bytes(),
                                       args.prompt or "")
        result = judge_with_retry(client, request, parse=parse_vision_response)
        if isinstance(result, JudgeFailure):
            _emit({"failure": result.last_error, "attempts": result.attempts},
                  args.json, [f"judge failed after {result.attempts} attempts"])
            return 0
        score = aggregate_vision(result)
        payload = {"aggregate": score,
                   "dimensions": {k: v.score for k, v in result.dimensions},
                   "empty_chart": result.empty_chart}
        _emit(payload, args.json,
              [f"vision score: {score:.4f}"] +
              [f"  {name}: {ds.score}" for name, ds in result.dimensions])
        return 0
    if args.kind == "mpb":
        request = build_mpb_request(gen_img, Path(args.reference).read_bytes())
        result = judge_with_retry(client, request, parse=mpb_verdict)
    else:
        request = build_sevq_request(gen_img, args.prompt or "")
        result = judge_with_retry(client, request, parse=parse_sevq_response)
    if isinstance(result, JudgeFailure):
        _emit({"failure": result.last_error, "attempts": result.attempts},
              args.json, [f"judge failed after {result.attempts} attempts"])
        return 0
    payload = {"aggregate": result.aggregate,
               "dimensions": {k: v.score for k, v in result.dimensions}}
    _emit(payload, args.json, [f"{args.kind} score: {result.aggregate:.4f}"])
    return 0


def cmd_generate(args) -> int:
    client = _client(args)
    table = load_table(args.data)
    if args.multiturn_file:
        utterances = [line for line in Path(args.multiturn_file)
                      .read_text(encoding="utf-8").splitlines() if line.strip()]
        outcome = pipeline.run_multiturn(utterances, table, client, mode=args.mode,
                                         max_retries=args.max_retries)
    else:
        outcome = pipeline.generate_chart(args.prompt, table, client,
                                          max_retries=args.max_retries)
    payload = outcome.to_dict()
    if args.out and outcome.spec is not None:
        Path(args.out).write_text(json.dumps(outcome.spec.parsed, indent=2) + "\n")
    _emit(payload, args.json, [
        f"status: {outcome.status} (retries used: {outcome.retries_used})",
        f"description: {outcome.description}",
        json.dumps(outcome.spec.parsed, indent=2) if outcome.spec else "(no valid spec)",
    ])
    return 0


def cmd_eval(args) -> int:
    loaded = harness.load_manifest(args.manifest)
    client = _client(args)
    adapter = harness.PipelineAdapter(client, max_retries=args.max_retries,
                                      multiturn_mode=args.mode)
    metrics = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
    judge_client = client if any(m in ("vision", "mpb", "sevq") for m in metrics) else None
    image_provider = None
    if judge_client is not None:
        image_provider = _reference_image_provider
    report = harness.run_eval(loaded, adapter, metrics=metrics, seed=args.seed,
                              judge_client=judge_client, image_provider=image_provider,
                              resamples=args.resamples)
    report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    for name in sorted(report.metrics):
        summary = report.metrics[name]
        print(f"{name:8s} mean={summary.mean:.4f} "
              f"ci=[{summary.ci.low:.4f}, {summary.ci.high:.4f}] n={summary.n}")
    if loaded.skipped_geoshape:
        print(f"skipped {loaded.skipped_geoshape} geoshape record(s)")
    return 0


def _reference_image_provider(record, outcome):
    """Offline default: reuse the reference image for both judge slots.

    Rendering generated specs is the renderer sidecar's job; when it is not
    configured the judge still needs bytes, and transcripts are keyed on them.
    """
    if record.reference_image_path is None:
        return None, None
    data = record.reference_image_path.read_bytes()
    return data, data


def cmd_ra_bench(args) -> int:
    if args.action == "build":
        loaded = harness.load_manifest(args.manifest)
        bench = harness.build_ra_benchmark(loaded, seed=args.seed)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        index = []
        for case in bench.cases:
            stem = case.case_id.replace(":", "__")
            data_file = out_dir / f"{stem}.csv"
            _write_table_csv(case.table, data_file)
            index.append({"case_id": case.case_id, "record_id": case.record_id,
                          "variant": case.variant, "utterance": case.utterance,
                          "data_path": data_file.name,
                          "dropped_columns": list(case.dropped_columns),
                          "expected": case.expected})
        (out_dir / "cases.jsonl").write_text(
            "\n".join(json.dumps(row) for row in index) + "\n")
        print(f"wrote {len(bench.cases)} cases to {out_dir} "
              f"(skipped {bench.skipped_no_encoding} without encoding fields)")
        return 0

    cases = _load_ra_cases(args.cases)
    analyses: dict[tuple[str, str], RequestAnalysis] = {}
    for line in Path(args.analyses).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        analyses[(row["case_id"], row["sensitivity"])] = RequestAnalysis(
            missing_columns=tuple(row.get("missing_columns", [])),
            infeasible=bool(row.get("infeasible", False)),
            off_topic=bool(row.get("off_topic", False)),
            warning=row.get("warning"))
    table = harness.score_ra_benchmark(cases, analyses)
    print(json.dumps(table, indent=2, sort_keys=True))
    return 0


def _write_table_csv(table, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(table.column_names)
        for row in table.rows:
            writer.writerow(["" if v is None else v for v in row])


def _load_ra_cases(path):
    base = Path(path).parent
    cases = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        cases.append(harness.RaCase(
            record_id=row["record_id"], variant=row["variant"],
            utterance=row["utterance"], table=load_table(base / row["data_path"]),
            dropped_columns=tuple(row["dropped_columns"]), expected=row["expected"]))
    return cases


def cmd_learn_weights(args) -> int:
    features = []
    with Path(args.features).open(encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        from .judge import VISION_DIMENSIONS
        for row in reader:
            features.append([float(row[d]) for d in VISION_DIMENSIONS])
    human = []
    with Path(args.human).open(encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            human.append(float(row["score"]))
    fit = stats.learn_weights_ridge(features, human, lam=args.ridge_lambda)
    payload = {"weights": dict(fit.weights.weights),
               "coefficients": list(fit.coefficients),
               "intercept": fit.intercept,
               "cv_pearson_learned": fit.cv_pearson_learned,
               "cv_pearson_uniform": fit.cv_pearson_uniform}
    _emit(payload, args.json,
          [f"{name}: {weight:.4f}" for name, weight in fit.weights.weights] +
          [f"cv pearson learned={fit.cv_pearson_learned:.4f} "
           f"uniform={fit.cv_pearson_uniform:.4f}"])
    return 0


def cmd_correlate(args) -> int:
    xs, ys = [], []
    with Path(args.infile).open(encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            if row.get(args.a) in (None, "") or row.get(args.b) in (None, ""):
                continue
            xs.append(float(row[args.a]))
            ys.append(float(row[args.b]))
    result = stats.pearson(xs, ys)
    payload = {"r": result.r, "ci_low": result.ci.low, "ci_high": result.ci.high,
               "n": result.n}
    _emit(payload, args.json,
          [f"pearson r = {result.r:.4f} "
           f"[{result.ci.low:.4f}, {result.ci.high:.4f}] (n={result.n})"])
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vegaeval",
                                     description="Validate, repair, and score "
                                                 "Vega-Lite charts from NL requests")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score-spec", help="score a generated spec against a reference")
    p.add_argument("--generated", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--utterance", default="")
    p.add_argument("--data")
    p.add_argument("--weights")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_score_spec)

    p = sub.add_parser("ecr", help="empty-chart check for one spec against data")
    p.add_argument("--spec", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ecr)

    p = sub.add_parser("judge", help="run a multimodal judge")
    p.add_argument("kind", choices=["vision", "mpb", "sevq"])
    p.add_argument("--generated", required=True)
    p.add_argument("--reference")
    p.add_argument("--prompt", default="")
    p.add_argument("--provider", choices=["live", "mock"], default="mock")
    p.add_argument("--transcript")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("generate", help="generate a chart from a prompt")
    p.add_argument("--data", required=True)
    p.add_argument("--prompt", default="")
    p.add_argument("--multiturn-file")
    p.add_argument("--mode", choices=["concatenated", "simulated"],
                   default="concatenated")
    p.add_argument("--max-retries", type=int, default=pipeline.DEFAULT_MAX_RETRIES)
    p.add_argument("--provider", choices=["live", "mock"], default="mock")
    p.add_argument("--transcript")
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="batch evaluation over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--metrics", default="spec,ecr,ver")
    p.add_argument("--provider", choices=["live", "mock"], default="mock")
    p.add_argument("--transcript")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resamples", type=int, default=2000)
    p.add_argument("--max-retries", type=int, default=pipeline.DEFAULT_MAX_RETRIES)
    p.add_argument("--mode", choices=["concatenated", "simulated"],
                   default="concatenated")
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ra-bench", help="build or score the analyzer benchmark")
    p.add_argument("action", choices=["build", "score"])
    p.add_argument("--manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--cases")
    p.add_argument("--analyses")
    p.set_defaults(func=cmd_ra_bench)

    p = sub.add_parser("learn-weights", help="fit judge dimension weights by ridge")
    p.add_argument("--features", required=True)
    p.add_argument("--human", required=True)
    p.add_argument("--lambda", dest="ridge_lambda", type=float, default=1.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_learn_weights)

    p = sub.add_parser("correlate", help="Pearson correlation between report columns")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_correlate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (VegaEvalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
