"""Batch evaluation harness: manifest loading, metric computation with
bootstrap confidence intervals, the analyzer perturbation benchmark, and the
human-study annotation bundle.

Examples are evaluated independently and aggregated after a stable sort by
example id, so a fixed seed yields a byte-identical report body regardless of
completion order (only the provenance timestamp varies between runs).
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from . import dataflow, specscore, vlspec
from .errors import (
    NoEncodingFields,
    SchemaViolation,
    UnsupportedFeature,
    VegaEvalError,
)
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
    VisionWeights,
    DEFAULT_VISION_WEIGHTS,
)
from .pipeline import GenerationOutcome, RequestAnalysis, generate_chart, run_multiturn
from .specscore import SpecScoreWeights
from .stats import Interval, bootstrap_ci
from .tables import DataTable, load_table
from .vlspec import RawSpec

KNOWN_METRICS = ("spec", "ecr", "ver", "vision", "mpb", "sevq")

DATASETS = ("nlv", "chartllm", "custom")
DIFFICULTIES = ("easy", "medium", "hard", "extra hard")
UTTERANCE_TYPES = ("command", "query", "question")


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalRecord:
    id: str
    dataset: str
    utterances: tuple[str, ...]
    data_path: Path
    reference_spec_path: Path
    sequential: bool = False
    reference_image_path: Path | None = None
    difficulty: str | None = None
    utterance_type: str | None = None
    extras: tuple[tuple[str, object], ...] = ()

    @property
    def utterance(self) -> str:
        return "\n".join(self.utterances)


@dataclass(frozen=True)
class LoadedManifest:
    records: tuple[EvalRecord, ...]
    skipped_geoshape: int = 0


_REQUIRED_FIELDS = ("id", "dataset", "utterances", "data_path", "reference_spec_path")
_KNOWN_FIELDS = set(_REQUIRED_FIELDS) | {
    "sequential", "reference_image_path", "difficulty", "utterance_type", "geoshape"}


def load_manifest(path) -> LoadedManifest:
    """Read a JSON-lines manifest; raises SchemaViolation with the line number.

    Records flagged ``"geoshape": true`` are excluded and counted, mirroring
    dataset curation that removes geoshape examples.
    """
    path = Path(path)
    base = path.parent
    records: list[EvalRecord] = []
    skipped = 0
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SchemaViolation(f"{path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"line {lineno}: not valid JSON ({exc.msg})") from exc
        if not isinstance(raw, dict):
            raise SchemaViolation(f"line {lineno}: record must be an object")
        if raw.get("geoshape") is True:
            skipped += 1
            continue
        records.append(_parse_record(raw, base, lineno))
    return LoadedManifest(tuple(records), skipped)


def _parse_record(raw: dict, base: Path, lineno: int) -> EvalRecord:
    for name in _REQUIRED_FIELDS:
        if name not in raw:
            raise SchemaViolation(f"line {lineno}: missing required field {name!r}")
    if raw["dataset"] not in DATASETS:
        raise SchemaViolation(f"line {lineno}: unknown dataset {raw['dataset']!r}")
    utterances = raw["utterances"]
    if not isinstance(utterances, list) or not utterances \
            or not all(isinstance(u, str) for u in utterances):
        raise SchemaViolation(f"line {lineno}: utterances must be a non-empty string list")
    sequential = bool(raw.get("sequential", False))
    if sequential and len(utterances) < 2:
        raise SchemaViolation(f"line {lineno}: sequential records need > 1 utterance")
    difficulty = raw.get("difficulty")
    if difficulty is not None and difficulty not in DIFFICULTIES:
        raise SchemaViolation(f"line {lineno}: unknown difficulty {difficulty!r}")
    utterance_type = raw.get("utterance_type")
    if utterance_type is not None and utterance_type not in UTTERANCE_TYPES:
        raise SchemaViolation(f"line {lineno}: unknown utterance_type {utterance_type!r}")

    def resolve(name: str, required: bool) -> Path | None:
        value = raw.get(name)
        if value is None:
            if required:
                raise SchemaViolation(f"line {lineno}: missing required field {name!r}")
            return None
        candidate = Path(value)
        if not candidate.is_absolute():
            candidate = base / candidate
        if not candidate.exists():
            raise SchemaViolation(f"line {lineno}: {name} {str(candidate)!r} does not exist")
        return candidate

    extras = tuple(sorted((k, _freeze(v)) for k, v in raw.items() if k not in _KNOWN_FIELDS))
    return EvalRecord(id=str(raw["id"]), dataset=raw["dataset"],
                      utterances=tuple(utterances),
                      data_path=resolve("data_path", required=True),
                      reference_spec_path=resolve("reference_spec_path", required=True),
                      sequential=sequential,
                      reference_image_path=resolve("reference_image_path", required=False),
                      difficulty=difficulty, utterance_type=utterance_type,
                      extras=extras)


def _freeze(value):
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


# ---------------------------------------------------------------------------
# Generation adapters
# ---------------------------------------------------------------------------


class GenerationAdapter(Protocol):
    def generate(self, record: EvalRecord, table: DataTable) -> GenerationOutcome: ...


@dataclass
class PipelineAdapter:
    """Runs the standard generation pipeline against a (usually mock) client."""

    client: object
    max_retries: int = 5
    multiturn_mode: str = "concatenated"

    def generate(self, record: EvalRecord, table: DataTable) -> GenerationOutcome:
        if record.sequential and len(record.utterances) > 1:
            return run_multiturn(record.utterances, table, self.client,
                                 mode=self.multiturn_mode, max_retries=self.max_retries)
        return generate_chart(record.utterance, table, self.client,
                              max_retries=self.max_retries)


ImageProvider = Callable[[EvalRecord, GenerationOutcome], tuple[bytes | None, bytes | None]]


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    ci: Interval
    n: int
    judge_failures: int = 0


@dataclass
class Report:
    metrics: dict[str, MetricSummary]
    examples: list[dict]
    groups: dict[str, dict[str, dict[str, MetricSummary]]]
    provenance: dict

    def body_dict(self) -> dict:
        """Everything except the timestamp; byte-stable under a fixed seed."""
        return {
            "metrics": {name: _summary_dict(s) for name, s in sorted(self.metrics.items())},
            "examples": self.examples,
            "groups": {
                axis: {group: {m: _summary_dict(s) for m, s in sorted(per_metric.items())}
                       for group, per_metric in sorted(by_group.items())}
                for axis, by_group in sorted(self.groups.items())
            },
            "provenance": {k: v for k, v in self.provenance.items() if k != "timestamp"},
        }

    def to_dict(self) -> dict:
        out = self.body_dict()
        out["provenance"] = dict(self.provenance)
        return out

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    def write_csv(self, path) -> None:
        if not self.examples:
            Path(path).write_text("", encoding="utf-8")
            return
        fieldnames = list(self.examples[0].keys())
        with Path(path).open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(self.examples)


def _summary_dict(summary: MetricSummary) -> dict:
    return {"mean": summary.mean, "ci_low": summary.ci.low, "ci_high": summary.ci.high,
            "n": summary.n, "judge_failures": summary.judge_failures}


def _config_digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def run_eval(manifest: LoadedManifest | list[EvalRecord], adapter: GenerationAdapter,
             metrics=("spec", "ecr", "ver"), seed: int = 0,
             judge_client=None, image_provider: ImageProvider | None = None,
             resamples: int = 2000,
             spec_weights: SpecScoreWeights | None = None,
             vision_weights: VisionWeights | None = None) -> Report:
    """Evaluate every record and aggregate metric means with bootstrap CIs.

    Judge metrics run only when both a judge client and an image provider are
    configured; judge failures are excluded from that metric's n and counted
    separately.  Per-example errors never abort the batch.
    """
    records = list(manifest.records if isinstance(manifest, LoadedManifest) else manifest)
    records.sort(key=lambda r: r.id)
    metrics = tuple(metrics)
    for name in metrics:
        if name not in KNOWN_METRICS:
            raise ValueError(f"unknown metric {name!r} (known: {KNOWN_METRICS})")
    vision_weights = vision_weights or DEFAULT_VISION_WEIGHTS

    samples: dict[str, list[float]] = {name: [] for name in metrics}
    failures: dict[str, int] = {name: 0 for name in metrics}
    example_rows: list[dict] = []

    for record in records:
        table = load_table(record.data_path)
        reference = vlspec.parse_spec(record.reference_spec_path.read_text(encoding="utf-8"))
        outcome = adapter.generate(record, table)
        row: dict = {"id": record.id, "dataset": record.dataset,
                     "difficulty": record.difficulty or "",
                     "utterance_type": record.utterance_type or "",
                     "status": outcome.status, "retries_used": outcome.retries_used}
        flags = _error_flags(outcome, table)
        for name in metrics:
            value = _metric_value(name, record, outcome, table, reference, flags,
                                  judge_client, image_provider,
                                  spec_weights, vision_weights)
            if value is None:
                row[name] = ""
                if name in ("vision", "mpb", "sevq") and flags["judge_failed"].get(name):
                    failures[name] += 1
            else:
                samples[name].append(value)
                row[name] = value
        example_rows.append(row)

    summaries: dict[str, MetricSummary] = {}
    for index, name in enumerate(sorted(metrics)):
        values = samples[name]
        if values:
            ci = bootstrap_ci(values, resamples=resamples, seed=seed * 10007 + index)
            summaries[name] = MetricSummary(float(np.mean(values)), ci, len(values),
                                            failures[name])
        else:
            summaries[name] = MetricSummary(float("nan"), Interval(float("nan"), float("nan")),
                                            0, failures[name])

    groups = _group_breakdowns(example_rows, metrics, seed, resamples)
    provenance = {
        "config_digest": _config_digest({
            "metrics": sorted(metrics), "seed": seed, "resamples": resamples,
            "multiturn": getattr(adapter, "multiturn_mode", None),
            "max_retries": getattr(adapter, "max_retries", None)}),
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    return Report(metrics=summaries, examples=example_rows, groups=groups,
                  provenance=provenance)


def _error_flags(outcome: GenerationOutcome, table: DataTable) -> dict:
    """VER: no schema-valid spec came out. ECR: that, or the chart is empty."""
    ver = outcome.spec is None
    empty = False
    if not ver:
        try:
            nspec = vlspec.normalize(outcome.spec)
            empty = dataflow.evaluate_chart(nspec, table).empty
        except VegaEvalError:
            empty = True  # cannot execute against the data: nothing to draw
    return {"ver": ver, "ecr": ver or empty, "judge_failed": {}}


def _metric_value(name, record, outcome, table, reference, flags,
                  judge_client, image_provider, spec_weights, vision_weights):
    if name == "ver":
        return 1.0 if flags["ver"] else 0.0
    if name == "ecr":
        return 1.0 if flags["ecr"] else 0.0
    if name == "spec":
        # ReferenceInvalid propagates: a broken reference is a benchmark bug.
        breakdown = specscore.spec_score(outcome.spec, reference, record.utterance,
                                         table=table, weights=spec_weights)
        return breakdown.final
    # Judge metrics need images.
    if judge_client is None or image_provider is None:
        return None
    gen_img, ref_img = image_provider(record, outcome)
    if gen_img is None:
        return None
    if name == "vision":
        if ref_img is None:
            return None
        request = build_vision_request(gen_img, ref_img, record.utterance)
        verdict = judge_with_retry(judge_client, request, parse=parse_vision_response)
        if isinstance(verdict, JudgeFailure):
            flags["judge_failed"]["vision"] = True
            return None
        return aggregate_vision(verdict, vision_weights)
    if name == "mpb":
        if ref_img is None:
            return None
        request = build_mpb_request(gen_img, ref_img)
        verdict = judge_with_retry(judge_client, request, parse=mpb_verdict)
        if isinstance(verdict, JudgeFailure):
            flags["judge_failed"]["mpb"] = True
            return None
        return verdict.aggregate
    if name == "sevq":
        request = build_sevq_request(gen_img, record.utterance)
        verdict = judge_with_retry(judge_client, request, parse=parse_sevq_response)
        if isinstance(verdict, JudgeFailure):
            flags["judge_failed"]["sevq"] = True
            return None
        return verdict.aggregate
    raise ValueError(name)


def _group_breakdowns(example_rows, metrics, seed, resamples):
    groups: dict[str, dict[str, dict[str, MetricSummary]]] = {}
    for axis in ("difficulty", "utterance_type"):
        by_group: dict[str, dict[str, MetricSummary]] = {}
        labels = sorted({row[axis] for row in example_rows if row[axis]})
        for label in labels:
            rows = [row for row in example_rows if row[axis] == label]
            per_metric: dict[str, MetricSummary] = {}
            for index, name in enumerate(sorted(metrics)):
                values = [row[name] for row in rows if row[name] != ""]
                if not values:
                    continue
                ci = bootstrap_ci(values, resamples=resamples,
                                  seed=seed * 10007 + 101 * (index + 1) + len(label))
                per_metric[name] = MetricSummary(float(np.mean(values)), ci, len(values))
            if per_metric:
                by_group[label] = per_metric
        if by_group:
            groups[axis] = by_group
    return groups


# ---------------------------------------------------------------------------
# Request-analyzer benchmark
# ---------------------------------------------------------------------------

RA_VARIANTS = ("normal", "drop_one", "drop_all")


@dataclass(frozen=True)
class RaCase:
    record_id: str
    variant: str  # normal | drop_one | drop_all
    utterance: str
    table: DataTable
    dropped_columns: tuple[str, ...]
    expected: str  # no_warning | missing_column | infeasible

    @property
    def case_id(self) -> str:
        return f"{self.record_id}:{self.variant}"


@dataclass(frozen=True)
class RaBenchmark:
    cases: tuple[RaCase, ...]
    skipped_no_encoding: int = 0


def _drop_columns(table: DataTable, dropped: tuple[str, ...]) -> DataTable:
    keep = [i for i, col in enumerate(table.columns) if col.name not in dropped]
    columns = tuple(table.columns[i] for i in keep)
    rows = tuple(tuple(row[i] for i in keep) for row in table.rows)
    return DataTable(columns, rows, table.source)


def reference_fields(nspec: vlspec.NormalizedSpec, table: DataTable) -> tuple[set, set]:
    """(encoding base fields, all referenced fields) that exist as columns."""
    columns = set(table.column_names)
    encoding_fields = {item.field for item in nspec.encoding_items()
                       if item.field is not None} & columns
    all_fields = set(encoding_fields)
    for t in nspec.transforms:
        if t.field:
            all_fields.add(t.field)
        if t.group_by:
            all_fields.update(t.group_by)
        if t.predicate is not None:
            from . import predicates as _pred
            all_fields.update(_pred.predicate_fields(t.predicate))
        if t.op == "calculate":
            from . import expr as _expr
            ast = _expr.parse_expression(t.params_dict()["expr"])
            all_fields.update(_expr.referenced_fields(ast))
    return encoding_fields, all_fields & columns


def build_ra_benchmark(manifest: LoadedManifest | list[EvalRecord],
                       seed: int = 0) -> RaBenchmark:
    """Per record, emit normal / drop-one / drop-all variants of the data.

    drop_one removes one seeded-uniform column among the reference encoding
    fields; drop_all removes every column the reference spec touches.
    Records whose references encode no dataset column are skipped and counted.
    """
    records = list(manifest.records if isinstance(manifest, LoadedManifest) else manifest)
    records.sort(key=lambda r: r.id)
    rng = np.random.default_rng(seed)
    cases: list[RaCase] = []
    skipped = 0
    for record in records:
        table = load_table(record.data_path)
        reference = vlspec.parse_spec(record.reference_spec_path.read_text(encoding="utf-8"))
        try:
            nspec = vlspec.normalize(reference)
        except UnsupportedFeature:
            skipped += 1
            continue
        encoding_fields, all_fields = reference_fields(nspec, table)
        if not encoding_fields:
            skipped += 1
            continue
        utterance = record.utterance
        cases.append(RaCase(record.id, "normal", utterance, table, (), "no_warning"))
        choice = sorted(encoding_fields)[int(rng.integers(0, len(encoding_fields)))]
        cases.append(RaCase(record.id, "drop_one", utterance,
                            _drop_columns(table, (choice,)), (choice,), "missing_column"))
        dropped_all = tuple(sorted(all_fields))
        cases.append(RaCase(record.id, "drop_all", utterance,
                            _drop_columns(table, dropped_all), dropped_all, "infeasible"))
    if not cases and skipped:
        raise NoEncodingFields(f"all {skipped} records lack encoding fields")
    return RaBenchmark(tuple(cases), skipped)


def ra_case_correct(case: RaCase, analysis: RequestAnalysis) -> bool:
    if case.expected == "no_warning":
        return analysis.warning is None and not analysis.infeasible
    if case.expected == "missing_column":
        dropped = case.dropped_columns[0].lower()
        return any(m.lower() == dropped for m in analysis.missing_columns)
    return analysis.infeasible


def score_ra_benchmark(cases, analyses: dict[tuple[str, str], RequestAnalysis]) -> dict:
    """Accuracy per (sensitivity x variant) plus a Total over the combined pool.

    ``analyses`` maps (case_id, sensitivity_level) to the analyzer output for
    that case under that sensitivity.
    """
    sensitivities = sorted({level for _, level in analyses})
    out: dict[str, dict[str, float | None]] = {}
    for level in sensitivities:
        cells: dict[str, float | None] = {}
        total_correct = 0
        total_n = 0
        for variant in RA_VARIANTS:
            variant_cases = [c for c in cases if c.variant == variant
                             and (c.case_id, level) in analyses]
            if not variant_cases:
                cells[variant] = None
                continue
            correct = sum(1 for c in variant_cases
                          if ra_case_correct(c, analyses[(c.case_id, level)]))
            cells[variant] = correct / len(variant_cases)
            total_correct += correct
            total_n += len(variant_cases)
        cells["total"] = (total_correct / total_n) if total_n else None
        out[level] = cells
    return out


# ---------------------------------------------------------------------------
# Human-study export
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotationBundle:
    packets: tuple[dict, ...]
    ratings_template: tuple[dict, ...]
    scale_max: int
    skipped_missing_image: int

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bundle.json").write_text(json.dumps({
            "scale_max": self.scale_max,
            "packets": list(self.packets)}, indent=2, sort_keys=True) + "\n")
        with (out / "ratings.csv").open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=["example_id", "annotator_slot",
                                                        "rating"])
            writer.writeheader()
            writer.writerows(self.ratings_template)


RATINGS_PER_EXAMPLE = 3


def human_study_export(records, generated_images: dict[str, str],
                       scale_max: int = 5) -> AnnotationBundle:
    """Build per-example annotation packets plus a triplicate rating sheet.

    Records without a generated or reference image are skipped and counted.
    """
    packets: list[dict] = []
    template: list[dict] = []
    skipped = 0
    for record in sorted(records, key=lambda r: r.id):
        gen_image = generated_images.get(record.id)
        if not gen_image or record.reference_image_path is None:
            skipped += 1
            continue
        packets.append({"example_id": record.id,
                        "prompt": record.utterance,
                        "generated_image": str(gen_image),
                        "reference_image": str(record.reference_image_path)})
        for slot in range(1, RATINGS_PER_EXAMPLE + 1):
            template.append({"example_id": record.id, "annotator_slot": slot, "rating": ""})
    return AnnotationBundle(tuple(packets), tuple(template), scale_max, skipped)


def ingest_ratings(rows, scale_max: int) -> dict[str, float]:
    """Triplicate ratings averaged per example, normalized to [0, 1]."""
    by_example: dict[str, list[float]] = {}
    for row in rows:
        rating = row.get("rating")
        if rating in (None, ""):
            continue
        by_example.setdefault(str(row["example_id"]), []).append(float(rating))
    return {example: (sum(values) / len(values)) / scale_max
            for example, values in sorted(by_example.items())}
