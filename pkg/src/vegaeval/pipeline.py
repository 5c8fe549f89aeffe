"""Chart generation pipeline: prompt assembly, the validate/repair/feedback
loop, multi-turn strategies, and the auxiliary request/header/recommendation
analyzers.

Every attempt runs the same gauntlet: extract a spec from the model reply,
apply the deterministic repair catalog, validate against the schema, and (when
valid) check the chart for emptiness against the data.  Validation failures go
back to the model with the validator's trace text; empty charts go back with
the transform log.  The auxiliary analyzers fail open: they may lose their
output on a malformed reply but never block generation.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from . import dataflow, repair as repair_mod, vlspec
from .clients import ChatMessage, ChatRequest, LLMClient
from .errors import MalformedDocument, MalformedVerdict, VegaEvalError
from .judge import extract_json_block
from .repair import RepairLog
from .tables import DataTable
from .vlspec import RawSpec, ValidationReport

log = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 5

SENSITIVITY_THRESHOLDS = {"low": 0.30, "medium": 0.50, "high": 0.70}


@dataclass(frozen=True)
class Sensitivity:
    """Warning sensitivity: warnings fire when confidence < threshold, so a
    higher sensitivity uses a higher threshold."""

    level: str
    threshold: float

    @classmethod
    def from_level(cls, level: str) -> "Sensitivity":
        if level not in SENSITIVITY_THRESHOLDS:
            raise ValueError(f"unknown sensitivity level {level!r}")
        return cls(level, SENSITIVITY_THRESHOLDS[level])


@dataclass(frozen=True)
class Attempt:
    spec_text: str | None
    validation: ValidationReport | None
    repairs: RepairLog = ()
    empty: bool | None = None
    feedback: str | None = None


@dataclass(frozen=True)
class GenerationOutcome:
    spec: RawSpec | None
    description: str
    attempts: tuple[Attempt, ...]
    retries_used: int
    status: str  # ok | ok_after_repair | failed

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "retries_used": self.retries_used,
            "description": self.description,
            "spec": self.spec.parsed if self.spec is not None else None,
            "attempts": [
                {"spec_text": a.spec_text,
                 "valid": a.validation.valid if a.validation else False,
                 "repairs": [f"{r.rule}@{r.path}" for r in a.repairs],
                 "empty": a.empty,
                 "feedback": a.feedback}
                for a in self.attempts
            ],
        }


@dataclass(frozen=True)
class ColumnMapping:
    phrase: str
    column: str | None
    confidence: float


@dataclass(frozen=True)
class RequestAnalysis:
    column_mappings: tuple[ColumnMapping, ...] = ()
    missing_columns: tuple[str, ...] = ()
    infeasible: bool = False
    off_topic: bool = False
    warning: str | None = None


@dataclass(frozen=True)
class HeaderIssue:
    column: str
    issue: str


# ---------------------------------------------------------------------------
# Prompt assembly
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def _fewshot_examples() -> list[dict]:
    text = resources.files("vegaeval").joinpath("data/fewshot_examples.json").read_text("utf-8")
    return json.loads(text)["examples"]


PREVIEW_ROWS = 5


def format_table_preview(table: DataTable, max_rows: int = PREVIEW_ROWS) -> str:
    """Header plus the first rows as aligned columns."""
    names = list(table.column_names)
    rows = [[_cell_text(v) for v in row] for row in table.rows[:max_rows]]
    widths = [max(len(names[i]), *(len(r[i]) for r in rows)) if rows else len(names[i])
              for i in range(len(names))]
    lines = ["  ".join(name.ljust(widths[i]) for i, name in enumerate(names))]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


def _cell_text(value) -> str:
    if value is None:
        return ""
    return str(value)


_GENERATION_SYSTEM_HEADER = """You translate natural-language requests into Vega-Lite v5 \
chart specifications. Use only these marks: arc, area, bar, boxplot, circle, line, point, \
rect, rule, square, text, tick. Use transforms (filter, aggregate, bin, timeUnit, calculate) \
when the request needs them, and row/column encoding channels for faceting.

Reply with a fenced json block containing ONLY the Vega-Lite specification, followed by a \
one-sentence natural-language description of the chart.

When the conversation contains earlier charts, treat follow-up requests as refinements of \
the most recent chart rather than new charts.

Examples:"""


@lru_cache(maxsize=1)
def generation_system_prompt() -> str:
    parts = [_GENERATION_SYSTEM_HEADER]
    for example in _fewshot_examples():
        parts.append(
            f"\nRequest: {example['request']}\n"
            f"Columns: {', '.join(example['columns'])}\n"
            "```json\n" + json.dumps(example["spec"], indent=2) + "\n```\n"
            f"{example['description']}")
    return "\n".join(parts)


@dataclass(frozen=True)
class Turn:
    utterance: str
    spec_text: str
    description: str = ""


def build_generation_prompt(utterance: str, table: DataTable,
                            history: tuple[Turn, ...] = ()) -> ChatRequest:
    """System prompt with few-shot examples; user content embeds the header
    row plus the first five data rows; prior turns ride along as history."""
    preview = format_table_preview(table)
    user = (f"Dataset ({len(table)} rows; first {min(PREVIEW_ROWS, len(table))} shown):\n"
            f"{preview}\n\nRequest: {utterance}")
    messages: list[ChatMessage] = []
    for turn in history:
        messages.append(ChatMessage("user", turn.utterance))
        messages.append(ChatMessage("assistant",
                                    f"```json\n{turn.spec_text}\n```\n{turn.description}"))
    return ChatRequest(system_prompt=generation_system_prompt(), user_prompt=user,
                       history=tuple(messages), temperature=0.0)


# ---------------------------------------------------------------------------
# Spec extraction from model output
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def extract_spec_text(response: str) -> str | None:
    """First fenced block; failing that, the longest braced substring that
    parses as JSON (robust to chatty models)."""
    if not isinstance(response, str):
        return None
    for match in _FENCE_RE.finditer(response):
        candidate = match.group(1).strip()
        if candidate:
            return candidate
    best: str | None = None
    for start in [m.start() for m in re.finditer(r"\{", response)]:
        depth = 0
        for end in range(start, len(response)):
            if response[end] == "{":
                depth += 1
            elif response[end] == "}":
                depth -= 1
                if depth == 0:
                    candidate = response[start:end + 1]
                    if best is None or len(candidate) > len(best):
                        try:
                            json.loads(candidate)
                            best = candidate
                        except json.JSONDecodeError:
                            pass
                    break
    return best


def extract_description(response: str) -> str:
    without_fences = _FENCE_RE.sub("", response or "")
    return without_fences.strip()


# ---------------------------------------------------------------------------
# Generation loop
# ---------------------------------------------------------------------------


def generate_chart(utterance: str, table: DataTable, client: LLMClient,
                   max_retries: int = DEFAULT_MAX_RETRIES,
                   history: tuple[Turn, ...] = ()) -> GenerationOutcome:
    """Generate a spec with the error-correction feedback loop.

    Issues at most ``max_retries + 1`` model calls.  Status is ``ok`` when the
    final spec is schema-valid and draws a non-empty chart, ``ok_after_repair``
    when the accepted attempt needed catalog repairs, ``failed`` otherwise.
    """
    base = build_generation_prompt(utterance, table, history)
    conversation: list[ChatMessage] = list(base.history)
    attempts: list[Attempt] = []
    user_prompt = base.user_prompt

    for attempt_index in range(max_retries + 1):
        request = ChatRequest(system_prompt=base.system_prompt, user_prompt=user_prompt,
                              history=tuple(conversation), temperature=0.0)
        response = client.send(request)
        conversation.append(ChatMessage("user", user_prompt))
        conversation.append(ChatMessage("assistant", response))

        spec_text = extract_spec_text(response)
        if spec_text is None:
            feedback = ("No specification block was found in the reply. "
                        "Reply with the full Vega-Lite spec in a fenced json block.")
            attempts.append(Attempt(None, None, feedback=feedback))
            user_prompt = feedback
            continue
        try:
            parsed = vlspec.parse_spec(spec_text)
        except MalformedDocument as exc:
            feedback = (f"The specification is not valid JSON: {exc}. "
                        "Reply with the corrected full specification.")
            attempts.append(Attempt(spec_text, None, feedback=feedback))
            user_prompt = feedback
            continue

        repaired, repair_log = repair_mod.repair_known_defects(
            parsed, vlspec.validate_schema(parsed), table)
        report = vlspec.validate_schema(repaired)
        if not report.valid:
            feedback = (f"The specification failed validation.\n{report.trace_text}\n"
                        "Fix these problems and reply with the corrected full specification.")
            attempts.append(Attempt(spec_text, report, repair_log, feedback=feedback))
            user_prompt = feedback
            continue

        try:
            nspec = vlspec.normalize(repaired)
            evaluation = dataflow.evaluate_chart(nspec, table)
        except VegaEvalError as exc:
            feedback = (f"The specification cannot be executed against the data: {exc}. "
                        "Reply with a corrected full specification.")
            attempts.append(Attempt(spec_text, report, repair_log, empty=True,
                                    feedback=feedback))
            user_prompt = feedback
            continue

        if evaluation.empty:
            trail = "\n".join(f"  {line}" for line in evaluation.applied)
            feedback = (f"The specification is valid but draws an EMPTY chart "
                        f"(reason: {evaluation.reason}).\nTransform log:\n{trail}\n"
                        "Check filter values against the data sample and reply with a "
                        "corrected full specification.")
            attempts.append(Attempt(spec_text, report, repair_log, empty=True,
                                    feedback=feedback))
            user_prompt = feedback
            continue

        attempts.append(Attempt(spec_text, report, repair_log, empty=False))
        status = "ok_after_repair" if repair_log else "ok"
        return GenerationOutcome(spec=repaired,
                                 description=extract_description(response),
                                 attempts=tuple(attempts),
                                 retries_used=attempt_index,
                                 status=status)

    # Exhausted: keep the last schema-valid spec, if any, for downstream scoring.
    final_spec = None
    for attempt in reversed(attempts):
        if attempt.validation is not None and attempt.validation.valid \
                and attempt.spec_text is not None:
            repaired, _ = repair_mod.repair_known_defects(
                vlspec.parse_spec(attempt.spec_text), None, table)
            final_spec = repaired
            break
    return GenerationOutcome(spec=final_spec, description="",
                             attempts=tuple(attempts),
                             retries_used=max_retries, status="failed")


def concat_turns(utterances: list[str] | tuple[str, ...]) -> str:
    """Join multi-turn prompts into one newline-delimited prompt."""
    if not utterances:
        raise ValueError("concat_turns needs at least one utterance")
    return "\n".join(utterances)


def run_multiturn(utterances, table: DataTable, client: LLMClient,
                  mode: str = "concatenated",
                  max_retries: int = DEFAULT_MAX_RETRIES) -> GenerationOutcome:
    """Multi-turn evaluation: one concatenated prompt, or simulated turns
    where each follow-up refines the previous outcome."""
    utterances = list(utterances)
    if not utterances:
        raise ValueError("run_multiturn needs at least one utterance")
    if mode == "concatenated":
        return generate_chart(concat_turns(utterances), table, client, max_retries)
    if mode != "simulated":
        raise ValueError(f"unknown multi-turn mode {mode!r}")
    history: list[Turn] = []
    outcome: GenerationOutcome | None = None
    for utterance in utterances:
        outcome = generate_chart(utterance, table, client, max_retries, tuple(history))
        spec_text = outcome.spec.text if outcome.spec is not None else "{}"
        history.append(Turn(utterance, spec_text, outcome.description))
    return outcome


# ---------------------------------------------------------------------------
# Auxiliary analyzers (fail-open)
# ---------------------------------------------------------------------------

_REQUEST_ANALYZER_SYSTEM = """You check visualization requests against a dataset's columns. \
Map each phrase of the request that refers to data onto the most plausible column and give \
a confidence between 0 and 1. List requested concepts with no matching column under \
"missing_columns". Set "off_topic" to true when the request is not about this data at all, \
and "infeasible" to true when the request cannot be answered with the available columns.

Reply with a fenced json block exactly in this shape:

```json
{
  "mappings": [{"phrase": "...", "column": "...", "confidence": 0.0}],
  "missing_columns": [],
  "off_topic": false,
  "infeasible": false
}
```"""


def _analysis_from_payload(payload: dict, sensitivity: Sensitivity) -> RequestAnalysis:
    mappings = []
    for entry in payload.get("mappings", []):
        if not isinstance(entry, dict):
            raise MalformedVerdict("mapping entries must be objects")
        confidence = entry.get("confidence")
        if not isinstance(confidence, (int, float)) or not 0 <= confidence <= 1:
            raise MalformedVerdict(f"confidence {confidence!r} outside [0, 1]")
        column = entry.get("column")
        mappings.append(ColumnMapping(str(entry.get("phrase", "")),
                                      None if column is None else str(column),
                                      float(confidence)))
    missing = tuple(str(m) for m in payload.get("missing_columns", []))
    off_topic = bool(payload.get("off_topic", False))
    infeasible = bool(payload.get("infeasible", False)) and (bool(missing) or off_topic)

    warnings: list[str] = []
    for mapping in mappings:
        if mapping.column is None or mapping.confidence < sensitivity.threshold:
            warnings.append(f"low-confidence mapping for {mapping.phrase!r} "
                            f"({mapping.confidence:.2f} < {sensitivity.threshold:.2f})")
    if missing:
        warnings.append("no column matches: " + ", ".join(missing))
    if off_topic:
        warnings.append("request does not appear to concern this dataset")
    return RequestAnalysis(column_mappings=tuple(mappings), missing_columns=missing,
                           infeasible=infeasible, off_topic=off_topic,
                           warning="; ".join(warnings) if warnings else None)


def analyze_request(utterance: str, table: DataTable, client: LLMClient,
                    sensitivity: Sensitivity | str = "low") -> RequestAnalysis:
    """Map utterance phrases to columns with confidences; warn below threshold.

    Fail-open: after one retry on a malformed reply, returns a neutral
    analysis rather than blocking generation.
    """
    if isinstance(sensitivity, str):
        sensitivity = Sensitivity.from_level(sensitivity)
    user = (f"Columns: {', '.join(table.column_names)}\n"
            f"Request: {utterance}")
    request = ChatRequest(system_prompt=_REQUEST_ANALYZER_SYSTEM, user_prompt=user,
                          temperature=0.0)
    for attempt in range(2):
        try:
            payload = extract_json_block(client.send(request))
            return _analysis_from_payload(payload, sensitivity)
        except (MalformedVerdict, KeyError, TypeError) as exc:
            log.warning("request analyzer reply malformed (attempt %d): %s", attempt + 1, exc)
            request = ChatRequest(system_prompt=_REQUEST_ANALYZER_SYSTEM,
                                  user_prompt=user + "\n\nReply with ONLY the fenced json "
                                                     "block in the requested shape.",
                                  temperature=0.0)
    return RequestAnalysis()


_HEADER_ANALYZER_SYSTEM = """You inspect dataset column names and flag names that are \
ambiguous or opaque for mapping natural-language requests onto columns (e.g. single \
letters, cryptic abbreviations, duplicated meanings). Reply with a fenced json block:

```json
{"issues": [{"column": "...", "issue": "..."}]}
```

An empty issues list is a perfectly good answer."""


def analyze_headers(table: DataTable, client: LLMClient) -> list[HeaderIssue]:
    """Flag ambiguous column names; fail-open to an empty list."""
    request = ChatRequest(system_prompt=_HEADER_ANALYZER_SYSTEM,
                          user_prompt=f"Columns: {', '.join(table.column_names)}",
                          temperature=0.0)
    try:
        payload = extract_json_block(client.send(request))
        issues = payload.get("issues", [])
        return [HeaderIssue(str(i.get("column", "")), str(i.get("issue", "")))
                for i in issues if isinstance(i, dict)]
    except (MalformedVerdict, KeyError, TypeError) as exc:
        log.warning("header analyzer reply malformed: %s", exc)
        return []


_RECOMMENDER_SYSTEM = """You propose diverse starter visualizations for a dataset the user \
has not asked anything about yet. Given the columns and a data sample, reply with a fenced \
json block containing an array of distinct Vega-Lite v5 specifications (different marks, \
different fields):

```json
{"charts": [{...}, {...}]}
```"""


def recommend_charts(table: DataTable, client: LLMClient, k: int = 3) -> list[RawSpec]:
    """Ask for k diverse specs; validate and auto-repair each, drop the rest."""
    if k < 1:
        raise ValueError("k must be at least 1")
    user = (f"Columns: {', '.join(table.column_names)}\n"
            f"Sample:\n{format_table_preview(table)}\n"
            f"Propose {k} charts.")
    request = ChatRequest(system_prompt=_RECOMMENDER_SYSTEM, user_prompt=user,
                          temperature=0.0)
    try:
        payload = extract_json_block(client.send(request))
        candidates = payload.get("charts", [])
    except (MalformedVerdict, KeyError, TypeError) as exc:
        log.warning("recommender reply malformed: %s", exc)
        return []
    out: list[RawSpec] = []
    for candidate in candidates:
        if not isinstance(candidate, dict):
            continue
        repaired, _ = repair_mod.repair_known_defects(candidate, None, table)
        if vlspec.validate_schema(repaired).valid:
            out.append(repaired)
        if len(out) == k:
            break
    return out
