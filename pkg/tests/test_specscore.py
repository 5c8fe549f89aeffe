from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vegaeval.errors import ReferenceInvalid
from vegaeval.specscore import (
    SpecScoreWeights,
    encoding_similarity,
    f_beta,
    mark_similarity,
    spec_score,
    transform_similarity,
    utterance_mentions_mark,
)
from vegaeval.tables import from_records
from vegaeval.vlspec import normalize

from conftest import CARS_ROWS, channel, make_spec


# ---------------------------------------------------------------------------
# f_beta
# ---------------------------------------------------------------------------


def test_f_beta_hand_evaluated():
    # P=1, R=0.5 -> (1+4)*1*0.5 / (4*1 + 0.5) = 2.5/4.5
    assert f_beta(1, 1, 2, 2.0) == pytest.approx(2.5 / 4.5, abs=1e-12)


def test_f_beta_perfect_and_disjoint():
    assert f_beta(2, 2, 2, 2.0) == 1.0
    assert f_beta(0, 3, 2, 2.0) == 0.0


def test_f_beta_vacuous_and_one_sided():
    assert f_beta(0, 0, 0, 2.0) == 1.0
    assert f_beta(0, 0, 3, 2.0) == 0.0
    assert f_beta(0, 3, 0, 2.0) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 12))
def test_f_beta_range_property(pred, ref, twice_credit):
    credit = min(twice_credit / 2.0, pred, ref)
    value = f_beta(credit, pred, ref, 2.0)
    assert 0.0 <= value <= 1.0


# ---------------------------------------------------------------------------
# encoding similarity
# ---------------------------------------------------------------------------


def enc_spec(**channels) -> dict:
    return make_spec(encoding=channels)


def test_axis_swap_scores_full_marks():
    gen = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"))
    ref = enc_spec(x=channel("b", "quantitative"), y=channel("a", "nominal"))
    score, swapped, _ = encoding_similarity(normalize(gen), normalize(ref))
    assert score == 1.0 and swapped is True


def test_missing_color_channel_high_precision_low_recall():
    gen = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"))
    ref = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"),
                   color=channel("c", "nominal"))
    score, swapped, _ = encoding_similarity(normalize(gen), normalize(ref))
    # credit 2, pred 2, ref 3: P=1, R=2/3, F2 = 5*(2/3)/(4+2/3) = 10/14
    assert score == pytest.approx(10 / 14, abs=1e-12)
    assert swapped is False


def test_identical_encodings():
    gen = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"))
    score, swapped, _ = encoding_similarity(normalize(gen), normalize(gen))
    assert score == 1.0 and swapped is False


def test_partial_credit_for_wrong_aggregate():
    gen = enc_spec(x=channel("a", "nominal"),
                   y=channel("b", "quantitative", aggregate="sum"))
    ref = enc_spec(x=channel("a", "nominal"),
                   y=channel("b", "quantitative", aggregate="mean"))
    score, _, _ = encoding_similarity(normalize(gen), normalize(ref))
    # credit 1.5 of 2: P=R=0.75 -> F2 = 0.75
    assert score == pytest.approx(0.75, abs=1e-12)


def test_swap_tie_resolves_unswapped():
    gen = enc_spec(x=channel("a", "nominal"), y=channel("a", "nominal"))
    ref = enc_spec(x=channel("a", "nominal"), y=channel("a", "nominal"))
    score, swapped, _ = encoding_similarity(normalize(gen), normalize(ref))
    assert score == 1.0 and swapped is False


# Brute-force oracle: best injective assignment between encoding items where
# credit requires the same channel, maximized over the optional x/y exchange.

def _oracle_credit(gen_item, ref_item):
    if gen_item.channel != ref_item.channel:
        return 0.0
    if (gen_item.field, gen_item.field_type, gen_item.aggregate,
            gen_item.bin, gen_item.time_unit, gen_item.value) == \
       (ref_item.field, ref_item.field_type, ref_item.aggregate,
            ref_item.bin, ref_item.time_unit, ref_item.value):
        return 1.0
    if gen_item.field is not None and gen_item.field == ref_item.field:
        return 0.5
    return 0.0


def _oracle_best_assignment(gen_items, ref_items):
    best = 0.0
    n = len(ref_items)
    for k in range(min(len(gen_items), n) + 1):
        for gen_subset in itertools.combinations(range(len(gen_items)), k):
            for ref_perm in itertools.permutations(range(n), k):
                credit = sum(_oracle_credit(gen_items[g], ref_items[r])
                             for g, r in zip(gen_subset, ref_perm))
                best = max(best, credit)
    return best


def _oracle_f2(gen_spec, ref_spec):
    import dataclasses
    gen_items = normalize(gen_spec).encoding_items()
    ref_items = normalize(ref_spec).encoding_items()

    def swap(item):
        if item.channel == "x":
            return dataclasses.replace(item, channel="y")
        if item.channel == "y":
            return dataclasses.replace(item, channel="x")
        return item

    best = 0.0
    for items in (gen_items, tuple(swap(i) for i in gen_items)):
        credit = _oracle_best_assignment(items, ref_items)
        best = max(best, f_beta(credit, len(items), len(ref_items), 2.0))
    return best


def test_encoding_similarity_matches_brute_force_on_small_universe():
    channels = ("x", "y", "color")
    fields = ("f1", "f2", "f3")
    universe = []
    for k in range(0, len(channels) + 1):
        for chans in itertools.combinations(channels, k):
            for combo in itertools.product(fields, repeat=k):
                universe.append(dict(zip(chans, combo)))
    specs = [enc_spec(**{c: channel(f, "nominal") for c, f in mapping.items()})
             for mapping in universe]
    # 40 specs x 40 specs keeps runtime modest while covering all shapes.
    sample = specs[::2][:40]
    for gen in sample:
        for ref in sample:
            got, _, _ = encoding_similarity(normalize(gen), normalize(ref))
            want = _oracle_f2(gen, ref)
            assert got == pytest.approx(want, abs=1e-12), (gen, ref)


# ---------------------------------------------------------------------------
# marks and the utterance lexicon
# ---------------------------------------------------------------------------


def test_mark_similarity_groups():
    assert mark_similarity("circle", "point") == 0.5
    assert mark_similarity("bar", "bar") == 1.0
    assert mark_similarity("bar", "line") == 0.0
    assert mark_similarity("line", "area") == 0.5
    assert mark_similarity("bar", "rect") == 0.5
    assert mark_similarity("arc", "bar") == 0.0


def test_utterance_lexicon():
    assert utterance_mentions_mark("show a bar chart of sales")
    assert not utterance_mentions_mark("compare sales by region")
    assert utterance_mentions_mark("scatterplot of mpg vs hp")
    # Oracle: lexicon lookup — "scatterplot" implies the point mark.
    assert utterance_mentions_mark("scatterplot of mpg vs hp", {"point"})
    assert not utterance_mentions_mark("scatterplot of mpg vs hp", {"bar"})
    assert utterance_mentions_mark("histogram of ages", {"bar"})
    assert utterance_mentions_mark("a pie of shares", {"arc"})
    assert not utterance_mentions_mark("")
    # Whole-word only: "barely" does not mention bars.
    assert not utterance_mentions_mark("barely visible trends")


# ---------------------------------------------------------------------------
# transform similarity
# ---------------------------------------------------------------------------


def test_transform_similarity_vacuous():
    gen = normalize(enc_spec(x=channel("a", "nominal")))
    assert transform_similarity(gen, gen) == 1.0


def test_transform_similarity_identity():
    spec = make_spec(encoding={"x": channel("a", "nominal")},
                     transform=[{"filter": {"field": "origin", "equal": "Japan"}}])
    n = normalize(spec)
    assert transform_similarity(n, n) == 1.0


def test_transform_partial_credit_same_field_different_constant():
    gen = make_spec(encoding={"x": channel("a", "nominal")},
                    transform=[{"filter": {"field": "origin", "equal": "JP"}}])
    ref = make_spec(encoding={"x": channel("a", "nominal")},
                    transform=[{"filter": {"field": "origin", "equal": "Japan"}}])
    got = transform_similarity(normalize(gen), normalize(ref))
    # Oracle: same op+field, different constant -> credit 0.5 over 1/1.
    assert got == pytest.approx(f_beta(0.5, 1, 1, 2.0), abs=1e-12)


def test_transform_no_credit_for_different_field():
    gen = make_spec(encoding={"x": channel("a", "nominal")},
                    transform=[{"filter": {"field": "other", "equal": "JP"}}])
    ref = make_spec(encoding={"x": channel("a", "nominal")},
                    transform=[{"filter": {"field": "origin", "equal": "Japan"}}])
    assert transform_similarity(normalize(gen), normalize(ref)) == 0.0


# ---------------------------------------------------------------------------
# spec_score
# ---------------------------------------------------------------------------


BASE = make_spec(mark="bar",
                 encoding={"x": channel("Origin", "nominal"),
                           "y": channel("MPG", "quantitative", aggregate="mean")})


def test_identity_scores_exactly_one():
    bd = spec_score(BASE, BASE, "compare mpg by origin")
    assert bd.final == 1.0
    assert not bd.invalid and not bd.empty


def test_invalid_generated_scores_zero():
    bd = spec_score({"mark": "sparkle"}, BASE, "")
    assert bd.final == 0.0 and bd.invalid
    bd = spec_score(None, BASE, "")
    assert bd.final == 0.0 and bd.invalid


def test_unsupported_generated_scores_zero():
    bd = spec_score({"layer": [{"mark": "bar"}]}, BASE, "")
    assert bd.final == 0.0 and bd.invalid


def test_reference_invalid_raises():
    with pytest.raises(ReferenceInvalid):
        spec_score(BASE, {"mark": "sparkle"}, "")


def test_mark_mention_boosts_mark_weight():
    gen = make_spec(mark="line", encoding=BASE["encoding"])
    no_mention = spec_score(gen, BASE, "compare mpg by origin")
    mention = spec_score(gen, BASE, "bar chart of mpg by origin")
    # Wrong mark costs more when the utterance asked for a bar chart.
    assert mention.final < no_mention.final
    assert mention.weights.w_mark == pytest.approx(0.30)
    assert mention.weights.w_encoding == pytest.approx(0.40)
    assert no_mention.final == pytest.approx(0.55 + 0.20 + 0.10, abs=1e-12)


def test_empty_chart_penalty():
    cars = from_records(CARS_ROWS)
    gen = make_spec(mark="bar", encoding=BASE["encoding"],
                    transform=[{"filter": {"field": "Origin", "equal": "JP"}}])
    ref = make_spec(mark="bar", encoding=BASE["encoding"],
                    transform=[{"filter": {"field": "Origin", "equal": "Japan"}}])
    bd = spec_score(gen, ref, "", table=cars)
    assert bd.empty
    without_table = spec_score(gen, ref, "")
    assert bd.final == pytest.approx(without_table.final * 0.1, abs=1e-12)


def test_stylistic_invariance():
    styled_gen = dict(BASE, title="Pretty", width=300)
    styled_ref = dict(BASE, background="#eee", height=200)
    plain = spec_score(BASE, BASE, "x")
    styled = spec_score(styled_gen, styled_ref, "x")
    assert plain.final == styled.final
    assert plain.f_encoding == styled.f_encoding


def test_monotonicity_adding_matching_channel():
    ref = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"),
                   color=channel("c", "nominal"))
    without = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"))
    with_color = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"),
                          color=channel("c", "nominal"))
    assert spec_score(with_color, ref, "").final >= spec_score(without, ref, "").final


def test_monotonicity_adding_spurious_channel():
    ref = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"))
    clean = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"))
    spurious = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"),
                        color=channel("zzz", "nominal"))
    assert spec_score(spurious, ref, "").final <= spec_score(clean, ref, "").final


def test_swap_never_lowers_score():
    ref = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"))
    gen = enc_spec(x=channel("a", "nominal"), y=channel("b", "quantitative"))
    swapped_gen = enc_spec(x=channel("b", "quantitative"), y=channel("a", "nominal"))
    assert spec_score(swapped_gen, ref, "").final == spec_score(gen, ref, "").final


def test_breakdown_reproducible_from_fields():
    import math
    gen = make_spec(mark="line", encoding={"x": channel("Origin", "nominal"),
                                           "y": channel("MPG", "quantitative")})
    bd = spec_score(gen, BASE, "show a line please")
    w = bd.weights
    recomputed = math.fsum([w.w_encoding * bd.f_encoding, w.w_mark * bd.s_mark,
                            w.w_transform * bd.f_transform, bd.validity_bonus])
    assert bd.final == recomputed


def test_custom_weights_are_configuration():
    weights = SpecScoreWeights(w_encoding=0.25, w_mark=0.25, w_transform=0.25,
                               w_validity=0.25, mark_mention_boost=0.0)
    gen = make_spec(mark="line", encoding=BASE["encoding"])
    bd = spec_score(gen, BASE, "", weights=weights)
    assert bd.final == pytest.approx(0.25 + 0.0 + 0.25 + 0.25, abs=1e-12)


def test_theta_not_mapped_to_x():
    # A donut chart using theta scores no encoding credit against an x/y bar.
    donut = make_spec(mark="arc", encoding={"theta": channel("v", "quantitative"),
                                            "color": channel("g", "nominal")})
    bar = make_spec(mark="bar", encoding={"x": channel("g", "nominal"),
                                          "y": channel("v", "quantitative")})
    bd = spec_score(donut, bar, "")
    assert bd.f_encoding == 0.0
    assert bd.s_mark == 0.0
    assert bd.final == pytest.approx(0.20 + 0.10, abs=1e-12)  # transforms vacuous + validity
