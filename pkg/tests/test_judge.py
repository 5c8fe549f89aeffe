from __future__ import annotations

import json

import pytest

from vegaeval.clients import ChatRequest, ScriptedClient, TranscriptClient, request_digest
from vegaeval.errors import MalformedVerdict, MissingImage
from vegaeval.judge import (
    DEFAULT_VISION_WEIGHTS,
    JudgeFailure,
    SEVQ_DIMENSIONS,
    VISION_DIMENSIONS,
    VisionWeights,
    aggregate_vision,
    build_mpb_request,
    build_sevq_request,
    build_vision_request,
    judge_with_retry,
    mpb_verdict,
    parse_mpb_response,
    parse_sevq_response,
    parse_vision_response,
)

PNG = b"\x89PNG fake image bytes"


def vision_reply(scores: dict[str, int], empty: bool = False, overall=None) -> str:
    payload = {"dimensions": {name: {"rationale": f"about {name}", "score": score}
                              for name, score in scores.items()},
               "empty_chart": empty}
    if overall is not None:
        payload["overall"] = overall
    return "Here is my judgement.\n```json\n" + json.dumps(payload, indent=1) + "\n```\n"


ALL_TWOS = {name: 2 for name in VISION_DIMENSIONS}


# ---------------------------------------------------------------------------
# request building
# ---------------------------------------------------------------------------


def test_vision_request_contains_dimensions_and_utterance():
    request = build_vision_request(PNG, PNG, "show sales by region")
    for name in VISION_DIMENSIONS:
        assert name in request.system_prompt
    assert "show sales by region" in request.user_prompt
    assert [img.role for img in request.images] == ["generated", "reference"]
    assert request.temperature == 0.0


def test_vision_request_empty_utterance_still_valid():
    request = build_vision_request(PNG, PNG, "")
    assert "no stated intent" in request.user_prompt


def test_vision_request_missing_image():
    with pytest.raises(MissingImage):
        build_vision_request(b"", PNG, "x")
    with pytest.raises(MissingImage):
        build_vision_request(PNG, b"", "x")


def test_mpb_request_has_no_utterance_slot():
    request = build_mpb_request(PNG, PNG)
    assert "prompt" not in request.user_prompt.lower()
    assert len(request.images) == 2


def test_sevq_request_single_image():
    request = build_sevq_request(PNG, "plot the data")
    assert len(request.images) == 1
    assert request.images[0].role == "generated"


def test_request_digest_recomputes_on_golden_fixture():
    # Oracle: recompute the digest over the canonical serialization by hand.
    import hashlib
    request = ChatRequest(system_prompt="sys", user_prompt="user", temperature=0.0)
    payload = {"system": "sys", "user": "user", "history": [], "images": [],
               "temperature": 0.0}
    expected = hashlib.sha256(
        json.dumps(payload, sort_keys=True, ensure_ascii=False).encode()).hexdigest()
    assert request_digest(request) == expected


def test_digest_stable_and_sensitive():
    a = build_vision_request(PNG, PNG, "x")
    b = build_vision_request(PNG, PNG, "x")
    c = build_vision_request(PNG, PNG, "y")
    assert request_digest(a) == request_digest(b)
    assert request_digest(a) != request_digest(c)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def test_parse_vision_all_twos():
    verdict = parse_vision_response(vision_reply(ALL_TWOS))
    assert verdict.dimension_scores() == ALL_TWOS
    assert verdict.empty_chart is False


def test_parse_vision_out_of_range_score():
    bad = dict(ALL_TWOS, data_encoding=3)
    with pytest.raises(MalformedVerdict):
        parse_vision_response(vision_reply(bad))


def test_parse_vision_missing_dimension():
    scores = {k: 1 for k in VISION_DIMENSIONS if k != "aesthetics"}
    with pytest.raises(MalformedVerdict):
        parse_vision_response(vision_reply(scores))


def test_parse_vision_missing_empty_flag():
    payload = {"dimensions": {k: {"score": 1} for k in VISION_DIMENSIONS}}
    with pytest.raises(MalformedVerdict):
        parse_vision_response("```json\n" + json.dumps(payload) + "\n```")


def test_parse_vision_overall_reported_not_aggregated():
    verdict = parse_vision_response(vision_reply(ALL_TWOS, overall=0.33))
    assert verdict.overall == 0.33
    assert aggregate_vision(verdict) == 1.0  # overall ignored


def test_parse_round_trip_identity():
    # parse(serialize(verdict)) keeps every score.
    scores = {"visualization_type": 2, "data_encoding": 1, "data_transformation": 0,
              "aesthetics": 2, "prompt_compliance": 1}
    verdict = parse_vision_response(vision_reply(scores))
    again = parse_vision_response(vision_reply(verdict.dimension_scores()))
    assert again.dimension_scores() == verdict.dimension_scores()


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def test_aggregate_all_twos_is_one():
    assert aggregate_vision(parse_vision_response(vision_reply(ALL_TWOS))) == 1.0


def test_aggregate_all_zeros_is_zero():
    zeros = {name: 0 for name in VISION_DIMENSIONS}
    assert aggregate_vision(parse_vision_response(vision_reply(zeros))) == 0.0


def test_aggregate_hand_computed_weighted_sum():
    scores = {"visualization_type": 2, "data_encoding": 1, "data_transformation": 2,
              "aesthetics": 0, "prompt_compliance": 1}
    weights = VisionWeights((
        ("visualization_type", 0.15), ("data_encoding", 0.30),
        ("data_transformation", 0.15), ("aesthetics", 0.10),
        ("prompt_compliance", 0.30)))
    got = aggregate_vision(parse_vision_response(vision_reply(scores)), weights)
    # 0.15*1 + 0.30*0.5 + 0.15*1 + 0.10*0 + 0.30*0.5 = 0.60
    assert got == pytest.approx(0.60, abs=1e-12)


def test_empty_chart_forces_zero():
    verdict = parse_vision_response(vision_reply(ALL_TWOS, empty=True))
    assert aggregate_vision(verdict) == 0.0


def test_mixed_verdict_can_land_on_fifty_eight_percent():
    # Constructed mixed-verdict fixture whose weighted sum is exactly 0.58:
    # weights keep encoding/compliance dominant and aesthetics discounted.
    weights = VisionWeights((
        ("visualization_type", 0.13), ("data_encoding", 0.32),
        ("data_transformation", 0.13), ("aesthetics", 0.10),
        ("prompt_compliance", 0.32)))
    scores = {"visualization_type": 2, "data_encoding": 1, "data_transformation": 2,
              "aesthetics": 0, "prompt_compliance": 1}
    got = aggregate_vision(parse_vision_response(vision_reply(scores)), weights)
    # Hand sum: 0.13*1 + 0.32*0.5 + 0.13*1 + 0.10*0 + 0.32*0.5 = 0.58.
    assert got == pytest.approx(0.58, abs=1e-12)
    assert round(100 * got) == 58


def test_aggregate_linear_and_order_invariant():
    scores = {"visualization_type": 1, "data_encoding": 2, "data_transformation": 0,
              "aesthetics": 1, "prompt_compliance": 2}
    shuffled = dict(reversed(list(scores.items())))
    a = aggregate_vision(parse_vision_response(vision_reply(scores)))
    b = aggregate_vision(parse_vision_response(vision_reply(shuffled)))
    assert a == b


def test_weight_rescaling_invariance():
    raw = {"visualization_type": 3, "data_encoding": 6, "data_transformation": 3,
           "aesthetics": 2, "prompt_compliance": 6}  # x20 of defaults
    rescaled = VisionWeights.from_dict(raw)
    scores = {"visualization_type": 2, "data_encoding": 1, "data_transformation": 2,
              "aesthetics": 0, "prompt_compliance": 1}
    verdict = parse_vision_response(vision_reply(scores))
    assert aggregate_vision(verdict, rescaled) == \
        pytest.approx(aggregate_vision(verdict, DEFAULT_VISION_WEIGHTS), abs=1e-12)


def test_vision_weights_validation():
    with pytest.raises(ValueError):
        VisionWeights((("visualization_type", 1.0),))
    with pytest.raises(ValueError):
        VisionWeights(tuple((d, 0.3) for d in VISION_DIMENSIONS))


# ---------------------------------------------------------------------------
# MPB / SEVQ
# ---------------------------------------------------------------------------


def mpb_reply(score) -> str:
    return "```json\n" + json.dumps({"rationale": "r", "score": score}) + "\n```"


def test_mpb_normalization():
    assert mpb_verdict(mpb_reply(100)).aggregate == 1.0
    assert mpb_verdict(mpb_reply(0)).aggregate == 0.0
    assert mpb_verdict(mpb_reply(62)).aggregate == pytest.approx(0.62)
    assert parse_mpb_response(mpb_reply(62)) == 62.0


def test_mpb_range_check():
    with pytest.raises(MalformedVerdict):
        parse_mpb_response(mpb_reply(101))
    with pytest.raises(MalformedVerdict):
        parse_mpb_response(mpb_reply("high"))


def sevq_reply(scores) -> str:
    payload = {"dimensions": {name: {"rationale": "r", "score": score}
                              for name, score in zip(SEVQ_DIMENSIONS, scores)}}
    return "```json\n" + json.dumps(payload) + "\n```"


def test_sevq_mean():
    assert parse_sevq_response(sevq_reply([10] * 6)).aggregate == 1.0
    assert parse_sevq_response(sevq_reply([5] * 6)).aggregate == 0.5
    # Oracle: arithmetic mean of (10,8,6,4,2,0) is 5 -> 0.5 normalized.
    scores = [10, 8, 6, 4, 2, 0]
    assert parse_sevq_response(sevq_reply(scores)).aggregate == \
        pytest.approx(sum(scores) / 6 / 10, abs=1e-12)


def test_sevq_range_check():
    with pytest.raises(MalformedVerdict):
        parse_sevq_response(sevq_reply([11, 5, 5, 5, 5, 5]))


# ---------------------------------------------------------------------------
# retry wrapper
# ---------------------------------------------------------------------------


def test_retry_recovers_on_second_attempt():
    client = ScriptedClient(["not json at all", vision_reply(ALL_TWOS)])
    request = build_vision_request(PNG, PNG, "x")
    verdict = judge_with_retry(client, request, max_retries=1)
    assert not isinstance(verdict, JudgeFailure)
    assert client.calls == 2
    # The retry carried a correction instruction.
    assert "could not be parsed" in client.requests[1].user_prompt


def test_retry_exhaustion_returns_failure_value():
    client = ScriptedClient(["nope", "still nope"])
    request = build_vision_request(PNG, PNG, "x")
    result = judge_with_retry(client, request, max_retries=1)
    assert isinstance(result, JudgeFailure)
    assert result.attempts == 2


def test_no_spurious_calls_on_first_success():
    client = ScriptedClient([vision_reply(ALL_TWOS)])
    verdict = judge_with_retry(client, build_vision_request(PNG, PNG, "x"))
    assert client.calls == 1
    assert not isinstance(verdict, JudgeFailure)


def test_transcript_client_round_trip(tmp_path):
    request = build_vision_request(PNG, PNG, "compare")
    path = tmp_path / "transcript.jsonl"
    path.write_text(json.dumps({"digest": request_digest(request),
                                "response": vision_reply(ALL_TWOS)}) + "\n")
    client = TranscriptClient.from_file(path)
    verdict = judge_with_retry(client, request)
    assert not isinstance(verdict, JudgeFailure)
    with pytest.raises(KeyError):
        client.send(build_vision_request(PNG, PNG, "different"))
