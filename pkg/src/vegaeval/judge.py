"""Multimodal-judge prompt building, response parsing, and score aggregation.

Three judge styles are supported: the five-dimension rubric judge (scores of
0/1/2 per dimension, weighted sum), a reference-only image-match judge scored
0-100, and a reference-free six-dimension judge scored 0-10 per dimension and
aggregated by plain mean.  All of them demand a fenced JSON block so parsing
is mechanical; a malformed reply is retried once with a correction suffix and
then recorded as a failure value rather than an exception.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

from .clients import ChatMessage, ChatRequest, ImageAttachment, LLMClient
from .errors import MalformedVerdict, MissingImage

# Request type alias: judge requests are plain chat requests with images.
JudgeRequest = ChatRequest

VISION_DIMENSIONS = ("visualization_type", "data_encoding", "data_transformation",
                     "aesthetics", "prompt_compliance")

SEVQ_DIMENSIONS = ("goal_compliance", "visualization_type", "data_encoding",
                   "data_transformation", "accuracy", "aesthetics")


@dataclass(frozen=True)
class VisionWeights:
    """Per-dimension weights; encoding and prompt compliance dominate while
    aesthetics is discounted."""

    weights: tuple[tuple[str, float], ...] = (
        ("visualization_type", 0.15),
        ("data_encoding", 0.30),
        ("data_transformation", 0.15),
        ("aesthetics", 0.10),
        ("prompt_compliance", 0.30),
    )

    def __post_init__(self):
        names = tuple(name for name, _ in self.weights)
        if sorted(names) != sorted(VISION_DIMENSIONS):
            raise ValueError(f"weights must cover exactly {VISION_DIMENSIONS}")
        total = math.fsum(w for _, w in self.weights)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")
        if any(w < 0 for _, w in self.weights):
            raise ValueError("weights must be nonnegative")

    def as_dict(self) -> dict[str, float]:
        return dict(self.weights)

    @classmethod
    def from_dict(cls, mapping: dict[str, float]) -> "VisionWeights":
        total = math.fsum(mapping.get(d, 0.0) for d in VISION_DIMENSIONS)
        if total <= 0:
            raise ValueError("weights must have positive mass")
        return cls(tuple((d, mapping.get(d, 0.0) / total) for d in VISION_DIMENSIONS))


DEFAULT_VISION_WEIGHTS = VisionWeights()


@dataclass(frozen=True)
class DimensionScore:
    score: int
    rationale: str = ""


@dataclass(frozen=True)
class JudgeVerdict:
    dimensions: tuple[tuple[str, DimensionScore], ...]
    empty_chart: bool = False
    aggregate: float | None = None
    overall: float | None = None  # parsed when the judge volunteers one; never aggregated
    raw_response: str = ""

    def dimension_scores(self) -> dict[str, int]:
        return {name: ds.score for name, ds in self.dimensions}


@dataclass(frozen=True)
class JudgeFailure:
    attempts: int
    last_error: str
    raw_responses: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Prompt building
# ---------------------------------------------------------------------------

_VISION_SYSTEM = """You are a meticulous visualization judge. You will see a GENERATED chart \
image and a REFERENCE chart image. Rate how well the generated chart matches the reference \
and fulfils the user's request.

Score each dimension on a discrete scale: 0 (wrong), 1 (partially right), or 2 (right):
- visualization_type: does the generated chart use an appropriate chart type?
- data_encoding: are the right data fields mapped to the right visual channels?
- data_transformation: are aggregations, filters, and binning equivalent?
- aesthetics: is the chart legible and reasonably styled?
- prompt_compliance: does the generated chart fulfil the user's stated intent?

Also set "empty_chart" to true if the generated chart shows no data at all.

Write your rationale for each dimension BEFORE its score. Reply with a fenced json block \
exactly in this shape:

```json
{
  "dimensions": {
    "visualization_type": {"rationale": "...", "score": 0},
    "data_encoding": {"rationale": "...", "score": 0},
    "data_transformation": {"rationale": "...", "score": 0},
    "aesthetics": {"rationale": "...", "score": 0},
    "prompt_compliance": {"rationale": "...", "score": 0}
  },
  "empty_chart": false
}
```"""

_MPB_SYSTEM = """You are a visualization judge. You will see a GENERATED chart image and a \
REFERENCE chart image. Rate how well the generated chart matches the reference chart on a \
0-100 scale, considering only the images themselves (there is no user prompt to consider).

Reply with a fenced json block exactly in this shape:

```json
{"rationale": "...", "score": 0}
```"""

_SEVQ_SYSTEM = """You are a visualization judge. You will see one GENERATED chart image and \
the request it was generated from. There is no reference chart; judge the chart on its own \
merits. Score each dimension from 0 (very poor) to 10 (excellent):
- goal_compliance: the chart addresses the stated request
- visualization_type: the chart type suits the data and task
- data_encoding: fields are mapped to effective visual channels
- data_transformation: any aggregation or filtering is appropriate
- accuracy: the chart faithfully presents the underlying data
- aesthetics: the chart is clear and well presented

Write your rationale for each dimension BEFORE its score. Reply with a fenced json block \
exactly in this shape:

```json
{
  "dimensions": {
    "goal_compliance": {"rationale": "...", "score": 0},
    "visualization_type": {"rationale": "...", "score": 0},
    "data_encoding": {"rationale": "...", "score": 0},
    "data_transformation": {"rationale": "...", "score": 0},
    "accuracy": {"rationale": "...", "score": 0},
    "aesthetics": {"rationale": "...", "score": 0}
  }
}
```"""


def _require_image(data: bytes, label: str) -> None:
    if not data:
        raise MissingImage(f"{label} image is empty")


def build_vision_request(gen_img: bytes, ref_img: bytes, utterance: str,
                         media_type: str = "image/png") -> JudgeRequest:
    """Rubric-judge request carrying both images and the user's intent."""
    _require_image(gen_img, "generated")
    _require_image(ref_img, "reference")
    intent = utterance if utterance else "(no stated intent; judge prompt_compliance " \
                                        "against a reasonable default reading of the data)"
    user = (f"User request: {intent}\n\n"
            "The first image is the GENERATED chart; the second is the REFERENCE chart. "
            "Judge them now.")
    return ChatRequest(system_prompt=_VISION_SYSTEM, user_prompt=user,
                       images=(ImageAttachment("generated", gen_img, media_type),
                               ImageAttachment("reference", ref_img, media_type)),
                       temperature=0.0)


def build_mpb_request(gen_img: bytes, ref_img: bytes,
                      media_type: str = "image/png") -> JudgeRequest:
    """Image-match judge request; deliberately carries no utterance."""
    _require_image(gen_img, "generated")
    _require_image(ref_img, "reference")
    user = ("The first image is the GENERATED chart; the second is the REFERENCE chart. "
            "Rate their similarity from 0 to 100.")
    return ChatRequest(system_prompt=_MPB_SYSTEM, user_prompt=user,
                       images=(ImageAttachment("generated", gen_img, media_type),
                               ImageAttachment("reference", ref_img, media_type)),
                       temperature=0.0)


def build_sevq_request(gen_img: bytes, utterance: str,
                       media_type: str = "image/png") -> JudgeRequest:
    """Reference-free judge request: one generated image plus the request."""
    _require_image(gen_img, "generated")
    intent = utterance if utterance else "(no stated request)"
    user = f"User request: {intent}\n\nJudge the attached generated chart."
    return ChatRequest(system_prompt=_SEVQ_SYSTEM, user_prompt=user,
                       images=(ImageAttachment("generated", gen_img, media_type),),
                       temperature=0.0)


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def extract_json_block(text: str) -> dict:
    """First fenced JSON object, else the outermost braced substring."""
    if not isinstance(text, str) or not text.strip():
        raise MalformedVerdict("empty response")
    for match in _FENCE_RE.finditer(text):
        try:
            value = json.loads(match.group(1))
            if isinstance(value, dict):
                return value
        except json.JSONDecodeError:
            continue
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        try:
            value = json.loads(text[start:end + 1])
            if isinstance(value, dict):
                return value
        except json.JSONDecodeError as exc:
            raise MalformedVerdict(f"response JSON does not parse: {exc}") from exc
    raise MalformedVerdict("no JSON object found in response")


def _parse_dimensions(payload: dict, names: tuple[str, ...],
                      lo: int, hi: int) -> tuple[tuple[str, DimensionScore], ...]:
    block = payload.get("dimensions")
    if not isinstance(block, dict):
        raise MalformedVerdict("verdict is missing the 'dimensions' object")
    out: list[tuple[str, DimensionScore]] = []
    for name in names:
        if name not in block:
            raise MalformedVerdict(f"verdict is missing dimension {name!r}")
        entry = block[name]
        if isinstance(entry, dict):
            score = entry.get("score")
            rationale = str(entry.get("rationale", ""))
        else:
            score, rationale = entry, ""
        if not isinstance(score, int) or isinstance(score, bool) or not lo <= score <= hi:
            raise MalformedVerdict(
                f"dimension {name!r} score {score!r} is not an integer in [{lo}, {hi}]")
        out.append((name, DimensionScore(score, rationale)))
    return tuple(out)


def parse_vision_response(text: str) -> JudgeVerdict:
    """Parse the rubric judge's reply; scores stay unaggregated."""
    payload = extract_json_block(text)
    dims = _parse_dimensions(payload, VISION_DIMENSIONS, 0, 2)
    empty = payload.get("empty_chart")
    if not isinstance(empty, bool):
        raise MalformedVerdict("verdict is missing the boolean 'empty_chart' flag")
    overall = payload.get("overall")
    if overall is not None and not isinstance(overall, (int, float)):
        raise MalformedVerdict("optional 'overall' must be a number when present")
    return JudgeVerdict(dimensions=dims, empty_chart=empty,
                        overall=float(overall) if overall is not None else None,
                        raw_response=text)


def aggregate_vision(verdict: JudgeVerdict,
                     weights: VisionWeights = DEFAULT_VISION_WEIGHTS) -> float:
    """Weighted sum of half-scaled dimension scores; an empty chart scores 0."""
    if verdict.empty_chart:
        return 0.0
    lookup = weights.as_dict()
    return math.fsum(lookup[name] * (ds.score / 2.0) for name, ds in verdict.dimensions)


def parse_mpb_response(text: str) -> float:
    """Single 0-100 similarity score."""
    payload = extract_json_block(text)
    score = payload.get("score")
    if not isinstance(score, (int, float)) or isinstance(score, bool) \
            or not 0 <= score <= 100:
        raise MalformedVerdict(f"score {score!r} is not a number in [0, 100]")
    return float(score)


def mpb_verdict(text: str) -> JudgeVerdict:
    score = parse_mpb_response(text)
    return JudgeVerdict(dimensions=(("image_match", DimensionScore(int(round(score)))),),
                        aggregate=score / 100.0, raw_response=text)


def parse_sevq_response(text: str) -> JudgeVerdict:
    """Six 0-10 dimensions aggregated by their unweighted mean."""
    payload = extract_json_block(text)
    dims = _parse_dimensions(payload, SEVQ_DIMENSIONS, 0, 10)
    mean = math.fsum(ds.score for _, ds in dims) / len(dims)
    return JudgeVerdict(dimensions=dims, aggregate=mean / 10.0, raw_response=text)


# ---------------------------------------------------------------------------
# Retry wrapper
# ---------------------------------------------------------------------------

_CORRECTION_SUFFIX = ("\n\nYour previous reply could not be parsed "
                      "({error}). Reply again with ONLY the fenced json block "
                      "in the requested shape.")


def judge_with_retry(client: LLMClient, request: JudgeRequest, max_retries: int = 1,
                     parse=parse_vision_response) -> JudgeVerdict | JudgeFailure:
    """Send, parse, and on a malformed reply reissue with a correction suffix.

    Failures are returned as values so a batch run never crashes on one bad
    judge reply.
    """
    raw: list[str] = []
    current = request
    error = "unknown"
    for attempt in range(max_retries + 1):
        text = client.send(current)
        raw.append(text)
        try:
            return parse(text)
        except MalformedVerdict as exc:
            error = str(exc)
            current = ChatRequest(
                system_prompt=request.system_prompt,
                user_prompt=request.user_prompt + _CORRECTION_SUFFIX.format(error=error),
                images=request.images,
                history=request.history + (ChatMessage("assistant", text),),
                temperature=request.temperature)
    return JudgeFailure(attempts=len(raw), last_error=error, raw_responses=tuple(raw))
