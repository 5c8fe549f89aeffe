"""Validate, repair, and score Vega-Lite charts generated from natural language."""

from .dataflow import ChartEvaluation, apply_transforms, evaluate_chart
from .errors import (
    DegenerateInput,
    EmptySample,
    MalformedDocument,
    MalformedVerdict,
    MissingImage,
    NoEncodingFields,
    RaggedRows,
    ReferenceInvalid,
    SchemaViolation,
    SingularSystem,
    TypeMismatch,
    UnknownField,
    UnreadableSource,
    UnsupportedFeature,
    UnsupportedTransform,
    VegaEvalError,
)
from .harness import EvalRecord, Report, build_ra_benchmark, load_manifest, run_eval, score_ra_benchmark
from .judge import (
    JudgeFailure,
    JudgeVerdict,
    VisionWeights,
    aggregate_vision,
    build_mpb_request,
    build_sevq_request,
    build_vision_request,
    judge_with_retry,
    parse_mpb_response,
    parse_sevq_response,
    parse_vision_response,
)
from .pipeline import (
    GenerationOutcome,
    RequestAnalysis,
    Sensitivity,
    analyze_headers,
    analyze_request,
    build_generation_prompt,
    concat_turns,
    generate_chart,
    recommend_charts,
    run_multiturn,
)
from .repair import RepairAction, repair_datetime, repair_known_defects
from .stats import Interval, PearsonResult, RidgeFit, bootstrap_ci, learn_weights_ridge, pearson
from .specscore import (
    DEFAULT_WEIGHTS,
    ScoreBreakdown,
    SpecScoreWeights,
    encoding_similarity,
    f_beta,
    mark_similarity,
    spec_score,
    transform_similarity,
    utterance_mentions_mark,
)
from .tables import Column, DataTable, load_table
from .vlspec import (
    NormalizedSpec,
    RawSpec,
    ValidationReport,
    normalize,
    parse_spec,
    serialize,
    validate_schema,
)

__version__ = "0.1.0"

__all__ = [
    "ChartEvaluation", "apply_transforms", "evaluate_chart",
    "DegenerateInput", "EmptySample", "MalformedDocument", "MalformedVerdict",
    "MissingImage", "NoEncodingFields", "RaggedRows", "ReferenceInvalid",
    "SchemaViolation", "SingularSystem", "TypeMismatch", "UnknownField",
    "UnreadableSource", "UnsupportedFeature", "UnsupportedTransform", "VegaEvalError",
    "EvalRecord", "Report", "build_ra_benchmark", "load_manifest", "run_eval",
    "score_ra_benchmark",
    "JudgeFailure", "JudgeVerdict", "VisionWeights", "aggregate_vision",
    "build_mpb_request", "build_sevq_request", "build_vision_request",
    "judge_with_retry", "parse_mpb_response", "parse_sevq_response",
    "parse_vision_response",
    "GenerationOutcome", "RequestAnalysis", "Sensitivity", "analyze_headers",
    "analyze_request", "build_generation_prompt", "concat_turns", "generate_chart",
    "recommend_charts", "run_multiturn",
    "RepairAction", "repair_datetime", "repair_known_defects",
    "Interval", "PearsonResult", "RidgeFit", "bootstrap_ci", "learn_weights_ridge",
    "pearson",
    "DEFAULT_WEIGHTS", "ScoreBreakdown", "SpecScoreWeights", "encoding_similarity",
    "f_beta", "mark_similarity", "spec_score", "transform_similarity",
    "utterance_mentions_mark",
    "Column", "DataTable", "load_table",
    "NormalizedSpec", "RawSpec", "ValidationReport", "normalize", "parse_spec",
    "serialize", "validate_schema",
    "__version__",
]
