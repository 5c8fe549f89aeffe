from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vegaeval.errors import MalformedDocument, UnsupportedFeature
from vegaeval.vlspec import (
    RawSpec,
    normalize,
    parse_spec,
    serialize,
    subset_schema,
    validate_schema,
)

from conftest import channel, make_spec


# ---------------------------------------------------------------------------
# parse_spec
# ---------------------------------------------------------------------------


def test_parse_minimal_document():
    spec = parse_spec('{"mark":"bar"}')
    assert spec.parsed == {"mark": "bar"}


def test_parse_truncated_document():
    with pytest.raises(MalformedDocument) as err:
        parse_spec('{"mark":')
    assert err.value.line is not None


def test_parse_agrees_with_generic_tree_parser():
    # Oracle: the parsed tree must match a plain JSON load for any corpus spec.
    text = json.dumps(make_spec(
        mark="point",
        encoding={"x": channel("a", "quantitative"), "y": channel("b", "quantitative")},
        data={"values": [{"a": 1, "b": 2}]},
    ))
    spec = parse_spec(text)
    assert spec.parsed == json.loads(text)
    assert set(spec.parsed) == {"mark", "encoding", "data"}


# ---------------------------------------------------------------------------
# validate_schema
# ---------------------------------------------------------------------------


def test_minimal_valid_spec():
    report = validate_schema({"mark": "bar", "encoding": {"x": {"field": "a", "type": "nominal"}}})
    assert report.valid


def test_unknown_mark_kind():
    report = validate_schema({"mark": "sparkle"})
    assert not report.valid
    assert any(i.path == "$.mark" for i in report.errors if i.severity == "error")


def test_aggregate_enum_membership():
    # Oracle: enumerate the vendored aggregate enum; 'avg' must be outside it,
    # while both 'average' and 'mean' are members.
    enum = subset_schema()["aggregates"]
    assert "mean" in enum and "average" in enum and "avg" not in enum
    bad = make_spec(encoding={"x": channel("a", "quantitative", aggregate="avg")})
    assert not validate_schema(bad).valid
    for ok_name in ("mean", "average"):
        ok = make_spec(encoding={"x": channel("a", "quantitative", aggregate=ok_name)})
        assert validate_schema(ok).valid, ok_name


def test_trace_text_lists_every_violation():
    report = validate_schema({"mark": "sparkle",
                              "encoding": {"x": {"field": "a", "type": "wrong"}}})
    assert "$.mark" in report.trace_text
    assert "$.encoding.x.type" in report.trace_text


def test_composition_keys_rejected():
    report = validate_schema({"layer": [{"mark": "bar"}]})
    assert not report.valid


def test_interactive_blocks_warn_but_pass():
    spec = make_spec(encoding={"x": channel("a", "nominal")}, params=[{"name": "p"}])
    report = validate_schema(spec)
    assert report.valid
    assert any(i.severity == "warning" and i.path == "$.params" for i in report.errors)


def test_unknown_channel_and_unknown_def_key():
    report = validate_schema(make_spec(encoding={"zz": channel("a", "nominal")}))
    assert not report.valid
    report = validate_schema(make_spec(encoding={"x": channel("a", "nominal", sparkle=1)}))
    assert not report.valid


def test_value_literal_constraints():
    ok = make_spec(encoding={"x": channel("a", "nominal"), "color": {"value": "red"}})
    assert validate_schema(ok).valid
    bad = make_spec(encoding={"x": {"value": 3, "aggregate": "mean"}})
    assert not validate_schema(bad).valid


def test_count_may_omit_field():
    ok = make_spec(encoding={"x": channel("a", "nominal"),
                             "y": {"aggregate": "count", "type": "quantitative"}})
    assert validate_schema(ok).valid
    bad = make_spec(encoding={"y": {"aggregate": "mean", "type": "quantitative"}})
    assert not validate_schema(bad).valid


def test_transform_validation():
    bad_op = make_spec(encoding={"x": channel("a", "nominal")},
                       transform=[{"window": []}])
    assert not validate_schema(bad_op).valid
    bad_expr = make_spec(encoding={"x": channel("a", "nominal")},
                         transform=[{"calculate": "datum.", "as": "z"}])
    assert not validate_schema(bad_expr).valid
    ok = make_spec(encoding={"x": channel("a", "nominal")},
                   transform=[{"filter": {"field": "a", "equal": 1}},
                              {"calculate": "datum.a * 2", "as": "z"}])
    assert validate_schema(ok).valid


# ---------------------------------------------------------------------------
# normalize
# ---------------------------------------------------------------------------


def test_inline_aggregate_hoisted():
    spec = make_spec(encoding={"x": channel("a", "nominal"),
                               "y": channel("b", "quantitative", aggregate="mean")})
    n = normalize(spec)
    assert len(n.transforms) == 1
    t = n.transforms[0]
    assert t.op == "aggregate" and t.field == "b" and t.params_dict()["op"] == "mean"
    y = [c for c in n.encodings if c.channel == "y"][0]
    assert y.field == "mean_b"  # channel carries the derived field reference


def test_row_and_column_facets_share_canonical_role():
    row = make_spec(encoding={"x": channel("a", "nominal"),
                              "row": channel("g", "nominal")})
    col = make_spec(encoding={"x": channel("a", "nominal"),
                              "column": channel("g", "nominal")})
    n_row, n_col = normalize(row), normalize(col)
    assert n_row.facet[0].original_axis == "row"
    assert n_col.facet[0].original_axis == "column"
    assert n_row.comparison_surface() == n_col.comparison_surface()


INLINE_VS_EXPLICIT = [
    # (inline form, explicit top-level transform form) built by hand
    (
        make_spec(encoding={"x": channel("o", "nominal"),
                            "y": channel("mpg", "quantitative", aggregate="mean")}),
        make_spec(encoding={"x": channel("o", "nominal"),
                            "y": channel("avg", "quantitative")},
                  transform=[{"aggregate": [{"op": "mean", "field": "mpg", "as": "avg"}],
                              "groupby": ["o"]}]),
    ),
    (
        make_spec(mark="bar",
                  encoding={"x": channel("hp", "quantitative", bin=True),
                            "y": {"aggregate": "count", "type": "quantitative"}}),
        make_spec(mark="bar",
                  encoding={"x": channel("hp_binned", "quantitative"),
                            "y": {"aggregate": "count", "type": "quantitative"}},
                  transform=[{"bin": True, "field": "hp", "as": "hp_binned"}]),
    ),
    (
        make_spec(mark="line",
                  encoding={"x": channel("d", "temporal", timeUnit="year"),
                            "y": channel("v", "quantitative", aggregate="sum")}),
        make_spec(mark="line",
                  encoding={"x": channel("yr", "temporal"),
                            "y": channel("total", "quantitative")},
                  transform=[{"timeUnit": "year", "field": "d", "as": "yr"},
                             {"aggregate": [{"op": "sum", "field": "v", "as": "total"}],
                              "groupby": ["yr"]}]),
    ),
    (
        make_spec(mark="point",
                  encoding={"x": channel("a", "quantitative", aggregate="average"),
                            "y": channel("o", "nominal")}),
        make_spec(mark="point",
                  encoding={"x": channel("m", "quantitative"),
                            "y": channel("o", "nominal")},
                  transform=[{"aggregate": [{"op": "mean", "field": "a", "as": "m"}],
                              "groupby": ["o"]}]),
    ),
    (
        make_spec(mark="bar",
                  encoding={"x": channel("o", "nominal"),
                            "y": channel("v", "quantitative", aggregate="median"),
                            "row": channel("g", "nominal")}),
        make_spec(mark="bar",
                  encoding={"x": channel("o", "nominal"),
                            "y": channel("med", "quantitative"),
                            "row": channel("g", "nominal")},
                  transform=[{"aggregate": [{"op": "median", "field": "v", "as": "med"}],
                              "groupby": ["g", "o"]}]),
    ),
]


@pytest.mark.parametrize("inline,explicit", INLINE_VS_EXPLICIT,
                         ids=[f"pair{i}" for i in range(len(INLINE_VS_EXPLICIT))])
def test_inline_and_explicit_transforms_compare_equal(inline, explicit):
    assert validate_schema(inline).valid and validate_schema(explicit).valid
    assert normalize(inline).comparison_surface() == normalize(explicit).comparison_surface()


def test_hoisted_transform_count_matches_inline_occurrences():
    spec = make_spec(encoding={
        "x": channel("a", "quantitative", bin=True),
        "y": channel("b", "quantitative", aggregate="mean"),
        "color": channel("d", "temporal", timeUnit="month"),
    })
    n = normalize(spec)
    assert len(n.transforms) == 3


def test_unsupported_features_raise():
    with pytest.raises(UnsupportedFeature):
        normalize({"layer": [{"mark": "bar"}]})
    with pytest.raises(UnsupportedFeature):
        normalize({"mark": "geoshape"})
    with pytest.raises(UnsupportedFeature):
        normalize({"repeat": {"row": ["a"]}, "spec": {"mark": "bar"}})


def test_stylistic_fields_preserved_but_not_compared():
    plain = make_spec(encoding={"x": channel("a", "nominal")})
    styled = make_spec(encoding={"x": channel("a", "nominal", title="The A")},
                       title="My chart", width=400, background="#fff")
    n_plain, n_styled = normalize(plain), normalize(styled)
    assert n_plain.comparison_surface() == n_styled.comparison_surface()
    assert n_styled.extras["top_level"]["title"] == "My chart"
    assert n_styled.extras["channel_styles"]["x"] == {"title": "The A"}


def test_value_literal_color_is_stylistic():
    spec = make_spec(encoding={"x": channel("a", "nominal"), "color": {"value": "red"}})
    n = normalize(spec)
    assert all(c.channel != "color" for c in n.encodings)
    plain = normalize(make_spec(encoding={"x": channel("a", "nominal")}))
    assert n.comparison_surface() == plain.comparison_surface()


def test_unknown_top_level_keys_survive_round_trip():
    spec = make_spec(encoding={"x": channel("a", "nominal")}, usermeta={"k": 1},
                     zzz_custom={"nested": [1, 2]})
    n = normalize(spec)
    rendered = serialize(n)
    assert rendered["zzz_custom"] == {"nested": [1, 2]}
    assert rendered["usermeta"] == {"k": 1}


def test_duplicate_transforms_deduplicated():
    spec = make_spec(encoding={"x": channel("a", "nominal")},
                     transform=[{"filter": {"field": "a", "equal": 1}},
                                {"filter": {"field": "a", "equal": 1}}])
    assert len(normalize(spec).transforms) == 1


def test_explicit_rename_applies_to_later_expressions():
    spec = make_spec(encoding={"x": channel("o", "nominal"),
                               "y": channel("scaled", "quantitative")},
                     transform=[
                         {"aggregate": [{"op": "mean", "field": "v", "as": "avgv"}],
                          "groupby": ["o"]},
                         {"calculate": "datum.avgv * 2", "as": "scaled"},
                     ])
    n = normalize(spec)
    calc = [t for t in n.transforms if t.op == "calculate"][0]
    assert "mean_v" in calc.params_dict()["expr"]


# ---------------------------------------------------------------------------
# Round-trip / idempotence properties
# ---------------------------------------------------------------------------

_fields = st.sampled_from(["alpha", "beta", "gamma"])
_marks = st.sampled_from(["bar", "line", "point", "area", "circle"])
_aggs = st.sampled_from([None, "mean", "sum", "median", "min", "max"])


@st.composite
def _specs(draw):
    enc = {"x": channel(draw(_fields), "nominal")}
    agg = draw(_aggs)
    y = channel(draw(_fields), "quantitative")
    if agg:
        y["aggregate"] = agg
    enc["y"] = y
    if draw(st.booleans()):
        enc["color"] = channel(draw(_fields), "nominal")
    if draw(st.booleans()):
        enc["row" if draw(st.booleans()) else "column"] = channel(draw(_fields), "nominal")
    transform = []
    if draw(st.booleans()):
        transform.append({"filter": {"field": draw(_fields), "equal": draw(st.integers(0, 5))}})
    spec = make_spec(mark=draw(_marks), encoding=enc)
    if transform:
        spec["transform"] = transform
    if draw(st.booleans()):
        spec["title"] = "t"
    return spec


@settings(max_examples=60, deadline=None)
@given(_specs())
def test_normalize_is_idempotent_over_serialize(spec):
    assert validate_schema(spec).valid
    once = normalize(spec)
    again = normalize(parse_spec(json.dumps(serialize(once))))
    assert once.comparison_surface() == again.comparison_surface()


def test_raw_spec_from_value_round_trips():
    doc = make_spec(encoding={"x": channel("a", "nominal")})
    raw = RawSpec.from_value(doc)
    assert json.loads(raw.text) == doc
