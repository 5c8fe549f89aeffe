"""Deterministic specification-correctness scoring.

The final score is a weighted sum of F-beta similarities for encodings, mark
and transforms, plus a small validity reward.  Schema-invalid generated specs
score exactly zero; empty charts are multiplied by a heavy penalty.  x/y axis
swaps and row/column facet exchanges are treated as equivalent, and visually
similar marks (circle vs point, line vs area, bar vs rect) earn half credit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field as dc_field, replace

from . import dataflow, predicates, vlspec
from .errors import ReferenceInvalid, UnsupportedFeature, VegaEvalError
from .tables import DataTable
from .vlspec import EncodingItem, MarkType, NormalizedSpec, RawSpec


@dataclass(frozen=True)
class SpecScoreWeights:
    """Weights are configuration: encoding carries most semantic information,
    and a mark mention in the utterance shifts weight from encoding to mark."""

    w_encoding: float = 0.55
    w_mark: float = 0.15
    w_transform: float = 0.20
    w_validity: float = 0.10
    mark_mention_boost: float = 0.15
    empty_penalty: float = 0.1
    partial_credit: float = 0.5
    beta: float = 2.0

    def effective(self, mark_mentioned: bool) -> "SpecScoreWeights":
        if not mark_mentioned:
            return self
        return replace(self,
                       w_mark=self.w_mark + self.mark_mention_boost,
                       w_encoding=self.w_encoding - self.mark_mention_boost)


DEFAULT_WEIGHTS = SpecScoreWeights()


@dataclass(frozen=True)
class MatchDetail:
    kind: str  # encoding | mark | transform
    generated: object
    reference: object
    credit: float


@dataclass(frozen=True)
class ScoreBreakdown:
    final: float
    f_encoding: float
    s_mark: float
    f_transform: float
    validity_bonus: float
    invalid: bool
    empty: bool
    swapped_axes: bool
    details: tuple[MatchDetail, ...] = ()
    weights: SpecScoreWeights = dc_field(default_factory=SpecScoreWeights)

    def to_dict(self) -> dict:
        return {
            "final": self.final,
            "f_encoding": self.f_encoding,
            "s_mark": self.s_mark,
            "f_transform": self.f_transform,
            "validity_bonus": self.validity_bonus,
            "invalid": self.invalid,
            "empty": self.empty,
            "swapped_axes": self.swapped_axes,
            "weights": {
                "w_encoding": self.weights.w_encoding,
                "w_mark": self.weights.w_mark,
                "w_transform": self.weights.w_transform,
                "w_validity": self.weights.w_validity,
                "empty_penalty": self.weights.empty_penalty,
                "beta": self.weights.beta,
            },
            "details": [
                {"kind": d.kind, "generated": _detail_repr(d.generated),
                 "reference": _detail_repr(d.reference), "credit": d.credit}
                for d in self.details
            ],
        }


def _detail_repr(item) -> object:
    if isinstance(item, EncodingItem):
        return {"channel": item.channel, "field": item.field, "type": item.field_type,
                "aggregate": item.aggregate, "bin": item.bin, "timeUnit": item.time_unit}
    if item is None:
        return None
    return repr(item)


# ---------------------------------------------------------------------------
# F-beta
# ---------------------------------------------------------------------------


def f_beta(matched_credit: float, pred_count: int, ref_count: int, beta: float = 2.0) -> float:
    """F-beta over partial-credit matches; beta > 1 favours recall.

    Both sides empty is a vacuous perfect match (1.0); one side empty scores 0.
    """
    if pred_count == 0 and ref_count == 0:
        return 1.0
    if pred_count == 0 or ref_count == 0:
        return 0.0
    precision = matched_credit / pred_count
    recall = matched_credit / ref_count
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1.0 + b2) * precision * recall / (b2 * precision + recall)


# ---------------------------------------------------------------------------
# Encoding similarity
# ---------------------------------------------------------------------------


def _item_credit(gen: EncodingItem, ref: EncodingItem, partial: float) -> float:
    """Credit for two items already known to sit on the same channel."""
    if gen.value is not None or ref.value is not None:
        return 1.0 if (gen.value == ref.value and gen.field == ref.field) else 0.0
    if (gen.field, gen.field_type, gen.aggregate, gen.bin, gen.time_unit) == \
            (ref.field, ref.field_type, ref.aggregate, ref.bin, ref.time_unit):
        return 1.0
    if gen.field is not None and gen.field == ref.field:
        return partial
    return 0.0


def _swap_xy(item: EncodingItem) -> EncodingItem:
    if item.channel == "x":
        return replace(item, channel="y")
    if item.channel == "y":
        return replace(item, channel="x")
    return item


def _match_items(gen_items, ref_items, partial: float):
    """Pair items per channel (optimally within each channel) and sum credit."""
    by_channel: dict[str, tuple[list, list]] = {}
    for item in gen_items:
        by_channel.setdefault(item.channel, ([], []))[0].append(item)
    for item in ref_items:
        by_channel.setdefault(item.channel, ([], []))[1].append(item)
    total = 0.0
    details: list[MatchDetail] = []
    for channel in sorted(by_channel):
        gens, refs = by_channel[channel]
        credit, pairs = _best_pairing(gens, refs, partial)
        total += credit
        details.extend(MatchDetail("encoding", g, r, c) for g, r, c in pairs)
    return total, tuple(details)


def _best_pairing(gens: list, refs: list, partial: float):
    """Exhaustive best assignment; channels rarely hold more than two items."""
    if not gens or not refs:
        return 0.0, [(g, None, 0.0) for g in gens] + [(None, r, 0.0) for r in refs]
    best_credit = -1.0
    best_pairs: list = []
    for assignment in _assignments(len(gens), len(refs)):
        credit = 0.0
        pairs = []
        used = set()
        for gi, ri in enumerate(assignment):
            if ri is None:
                pairs.append((gens[gi], None, 0.0))
                continue
            used.add(ri)
            c = _item_credit(gens[gi], refs[ri], partial)
            credit += c
            pairs.append((gens[gi], refs[ri], c))
        for ri, ref in enumerate(refs):
            if ri not in used:
                pairs.append((None, ref, 0.0))
        if credit > best_credit:
            best_credit = credit
            best_pairs = pairs
    return best_credit, best_pairs


def _assignments(n_gen: int, n_ref: int):
    """Yield tuples mapping each generated index to a ref index or None."""
    def rec(i: int, remaining: tuple):
        if i == n_gen:
            yield ()
            return
        for rest in rec(i + 1, remaining):
            yield (None,) + rest
        for ri in remaining:
            rest_remaining = tuple(r for r in remaining if r != ri)
            for rest in rec(i + 1, rest_remaining):
                yield (ri,) + rest

    yield from rec(0, tuple(range(n_ref)))


def encoding_similarity(gen: NormalizedSpec, ref: NormalizedSpec,
                        weights: SpecScoreWeights = DEFAULT_WEIGHTS):
    """F-beta over canonical encoding items, taking the better of the as-is
    and x/y-swapped readings of the generated spec.  Ties stay unswapped."""
    gen_items = gen.encoding_items()
    ref_items = ref.encoding_items()
    plain_credit, plain_details = _match_items(gen_items, ref_items, weights.partial_credit)
    swapped_items = tuple(_swap_xy(item) for item in gen_items)
    swap_credit, swap_details = _match_items(swapped_items, ref_items, weights.partial_credit)
    plain = f_beta(plain_credit, len(gen_items), len(ref_items), weights.beta)
    swapped = f_beta(swap_credit, len(gen_items), len(ref_items), weights.beta)
    if swapped > plain:
        return swapped, True, swap_details
    return plain, False, plain_details


# ---------------------------------------------------------------------------
# Mark similarity
# ---------------------------------------------------------------------------


def _similarity_groups() -> tuple[frozenset, ...]:
    return tuple(frozenset(g) for g in vlspec.subset_schema()["mark_similarity_groups"])


def mark_similarity(gen_mark: MarkType | str, ref_mark: MarkType | str) -> float:
    gen_kind = gen_mark.kind if isinstance(gen_mark, MarkType) else gen_mark
    ref_kind = ref_mark.kind if isinstance(ref_mark, MarkType) else ref_mark
    if gen_kind == ref_kind:
        return 1.0
    for group in _similarity_groups():
        if gen_kind in group and ref_kind in group:
            return 0.5
    return 0.0


# Utterance terms mapped to the mark they imply.
MARK_TERM_LEXICON: dict[str, str] = {
    "bar": "bar",
    "histogram": "bar",
    "line": "line",
    "scatter": "point",
    "scatterplot": "point",
    "pie": "arc",
    "area": "area",
    "heatmap": "rect",
    "boxplot": "boxplot",
}

_LEXICON_RE = re.compile(
    r"\b(" + "|".join(sorted(MARK_TERM_LEXICON, key=len, reverse=True)) + r")\b",
    re.IGNORECASE)


def utterance_mentions_mark(utterance: str, marks: frozenset | set | None = None) -> bool:
    """Whole-word lexicon match; `marks` restricts which implied kinds count."""
    if not utterance:
        return False
    for match in _LEXICON_RE.finditer(utterance):
        implied = MARK_TERM_LEXICON[match.group(1).lower()]
        if marks is None or implied in marks:
            return True
    return False


# ---------------------------------------------------------------------------
# Transform similarity
# ---------------------------------------------------------------------------


def _predicate_shape(pred) -> tuple | None:
    """(node kind, field, op) for simple predicates; None for compound ones."""
    if isinstance(pred, predicates.Comparison):
        return ("comparison", pred.field, pred.op)
    if isinstance(pred, predicates.OneOf):
        return ("one_of", pred.field, None)
    if isinstance(pred, predicates.Range):
        return ("range", pred.field, None)
    return None


def _transform_partial(gen_key: tuple, ref_key: tuple, partial: float) -> float:
    """Half credit for filters testing the same field the same way with a
    different constant."""
    gen_op, _, gen_pred, _, _, _ = gen_key
    ref_op, _, ref_pred, _, _, _ = ref_key
    if gen_op != "filter" or ref_op != "filter" or gen_pred is None or ref_pred is None:
        return 0.0
    gen_shape = _predicate_shape(gen_pred)
    if gen_shape is not None and gen_shape == _predicate_shape(ref_pred):
        return partial
    return 0.0


def transform_similarity(gen: NormalizedSpec, ref: NormalizedSpec,
                         beta: float = 2.0, partial: float = 0.5) -> float:
    gen_keys = list(gen.transform_items())
    ref_keys = list(ref.transform_items())
    credit = 0.0
    unmatched_gen = []
    remaining_ref = list(ref_keys)
    for key in gen_keys:
        if key in remaining_ref:
            remaining_ref.remove(key)
            credit += 1.0
        else:
            unmatched_gen.append(key)
    for key in unmatched_gen:
        best_i, best_c = None, 0.0
        for i, ref_key in enumerate(remaining_ref):
            c = _transform_partial(key, ref_key, partial)
            if c > best_c:
                best_i, best_c = i, c
        if best_i is not None:
            remaining_ref.pop(best_i)
            credit += best_c
    return f_beta(credit, len(gen_keys), len(ref_keys), beta)


# ---------------------------------------------------------------------------
# Full score
# ---------------------------------------------------------------------------


def _zero_breakdown(weights: SpecScoreWeights) -> ScoreBreakdown:
    return ScoreBreakdown(final=0.0, f_encoding=0.0, s_mark=0.0, f_transform=0.0,
                          validity_bonus=0.0, invalid=True, empty=False,
                          swapped_axes=False, weights=weights)


def spec_score(gen: RawSpec | dict | None, ref: RawSpec | dict,
               utterance: str = "", table: DataTable | None = None,
               weights: SpecScoreWeights | None = None) -> ScoreBreakdown:
    """Score a generated spec against a reference.

    A generated spec that fails schema validation (or cannot be normalized)
    scores exactly 0 with ``invalid=True``.  When a table is supplied and the
    chart comes out empty, the weighted sum is multiplied by the empty
    penalty.  Raises ReferenceInvalid when the reference itself is broken.
    """
    weights = weights or DEFAULT_WEIGHTS
    ref_report = vlspec.validate_schema(ref)
    if not ref_report.valid:
        raise ReferenceInvalid(ref_report.trace_text)
    try:
        ref_n = vlspec.normalize(ref)
    except UnsupportedFeature as exc:
        raise ReferenceInvalid(str(exc)) from exc

    if gen is None:
        return _zero_breakdown(weights)
    if not vlspec.validate_schema(gen).valid:
        return _zero_breakdown(weights)
    try:
        gen_n = vlspec.normalize(gen)
    except UnsupportedFeature:
        return _zero_breakdown(weights)

    eff = weights.effective(utterance_mentions_mark(utterance))
    f_enc, swapped, details = encoding_similarity(gen_n, ref_n, eff)
    s_mark = mark_similarity(gen_n.mark, ref_n.mark)
    f_tr = transform_similarity(gen_n, ref_n, eff.beta, eff.partial_credit)

    empty = False
    if table is not None:
        try:
            empty = dataflow.evaluate_chart(gen_n, table).empty
        except VegaEvalError:
            # A chart whose transforms cannot run against the data draws nothing.
            empty = True

    validity_bonus = eff.w_validity
    final = math.fsum([eff.w_encoding * f_enc,
                       eff.w_mark * s_mark,
                       eff.w_transform * f_tr,
                       validity_bonus])
    if empty:
        final *= eff.empty_penalty
    final = min(max(final, 0.0), 1.0)
    mark_detail = MatchDetail("mark", gen_n.mark.kind, ref_n.mark.kind, s_mark)
    return ScoreBreakdown(final=final, f_encoding=f_enc, s_mark=s_mark,
                          f_transform=f_tr, validity_bonus=validity_bonus,
                          invalid=False, empty=empty, swapped_axes=swapped,
                          details=details + (mark_detail,), weights=eff)
