from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asrkit.errors import ParseError, ValidationError
from asrkit.manifest import (HypothesisPair, UtteranceRecord, WordSpan,
                             parse_hypothesis_pairs, parse_manifest,
                             parse_transcripts, write_manifest)

from conftest import random_records


def test_parse_minimal_line():
    line = '{"id":"u1","audio_path":"a.wav","duration_s":10.0,"transcript":"hello world"}'
    records = parse_manifest([line])
    assert len(records) == 1
    rec = records[0]
    assert rec.words() == ["hello", "world"]
    assert rec.confidence is None
    assert rec.country is None


def test_parse_empty_file():
    assert parse_manifest([]) == []
    assert parse_manifest(["", "   \n"]) == []


def test_confidence_out_of_range():
    line = '{"id":"u1","audio_path":"a","duration_s":1.0,"transcript":"x","confidence":1.5}'
    with pytest.raises(ValidationError, match="confidence out of range"):
        parse_manifest([line])


def test_malformed_json_reports_line_number():
    lines = ['{"id":"u1","audio_path":"a","duration_s":1.0,"transcript":"x"}',
             "{not json"]
    with pytest.raises(ParseError, match="line 2"):
        parse_manifest(lines)


def test_duplicate_id_rejected():
    line = '{"id":"u1","audio_path":"a","duration_s":1.0,"transcript":"x"}'
    with pytest.raises(ValidationError, match="duplicate id"):
        parse_manifest([line, line])


@pytest.mark.parametrize("mutation,message", [
    ({"duration_s": 0.0}, "duration_s"),
    ({"duration_s": -3.0}, "duration_s"),
    ({"duration_s": True}, "duration_s"),
    ({"country": "usa"}, "country"),
    ({"country": "us"}, "country"),
    ({"id": ""}, "id"),
    ({"confidence": -0.1}, "confidence"),
    ({"bogus_key": 1}, "unknown keys"),
])
def test_field_validation(mutation, message):
    obj = {"id": "u1", "audio_path": "a", "duration_s": 1.0, "transcript": "x"}
    obj.update(mutation)
    with pytest.raises(ValidationError, match=message):
        parse_manifest([json.dumps(obj)])


def test_alignment_invariants():
    base = {"id": "u1", "audio_path": "a", "duration_s": 10.0, "transcript": "x y"}
    good = dict(base, word_alignments=[
        {"word": "x", "start_s": 0.0, "end_s": 1.0},
        {"word": "y", "start_s": 1.0, "end_s": 2.0}])
    assert parse_manifest([json.dumps(good)])[0].word_alignments[1].word == "y"

    overlapping = dict(base, word_alignments=[
        {"word": "x", "start_s": 0.0, "end_s": 2.0},
        {"word": "y", "start_s": 1.0, "end_s": 3.0}])
    with pytest.raises(ValidationError, match="overlap"):
        parse_manifest([json.dumps(overlapping)])

    past_end = dict(base, word_alignments=[
        {"word": "x", "start_s": 0.0, "end_s": 1.0},
        {"word": "y", "start_s": 1.0, "end_s": 11.0}])
    with pytest.raises(ValidationError, match="past duration"):
        parse_manifest([json.dumps(past_end)])

    wrong_words = dict(base, word_alignments=[
        {"word": "x", "start_s": 0.0, "end_s": 1.0},
        {"word": "z", "start_s": 1.0, "end_s": 2.0}])
    with pytest.raises(ValidationError, match="transcript word sequence"):
        parse_manifest([json.dumps(wrong_words)])

    backwards_span = dict(base, transcript="x", word_alignments=[
        {"word": "x", "start_s": 2.0, "end_s": 1.0}])
    with pytest.raises(ValidationError, match="start_s"):
        parse_manifest([json.dumps(backwards_span)])


def test_write_preserves_order_and_omits_optionals():
    records = [
        UtteranceRecord(id="b", audio_path="b.wav", duration_s=2.0, transcript=""),
        UtteranceRecord(id="a", audio_path="a.wav", duration_s=1.0,
                        transcript="hi", confidence=0.5, country="DE"),
    ]
    text = write_manifest(records)
    lines = text.splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["id"] == "b"
    assert "confidence" not in lines[0]
    assert "word_alignments" not in lines[1]


def test_write_is_deterministic():
    records = random_records(7, 50)
    assert write_manifest(records) == write_manifest(records)


def test_round_trip_generated_records():
    records = random_records(11, 200)
    text = write_manifest(records)
    # Split exactly like file reads do (plain newlines): JSON may contain
    # unescaped unicode separators that str.splitlines would also split on.
    assert parse_manifest(text.split("\n")) == records


_word = st.text(
    alphabet=st.characters(blacklist_categories=("Zs", "Zl", "Zp", "Cc", "Cs")),
    min_size=1, max_size=6)


@st.composite
def record_strategy(draw, index: int = 0):
    words = draw(st.lists(_word, max_size=6))
    with_spans = draw(st.booleans())
    spans = None
    if with_spans:
        # Integer-tenth times keep invariants exact under float arithmetic.
        edges = sorted(draw(st.lists(st.integers(0, 500), min_size=2 * len(words),
                                     max_size=2 * len(words), unique=True)))
        spans = tuple(WordSpan(w, edges[2 * i] / 10.0, edges[2 * i + 1] / 10.0)
                      for i, w in enumerate(words))
        duration = (edges[-1] if edges else 10) / 10.0 + 1.0
    else:
        duration = draw(st.floats(0.001, 1e5))
    return UtteranceRecord(
        id=f"rec{index}",
        audio_path=draw(st.text(max_size=10)),
        duration_s=duration,
        transcript=" ".join(words),
        confidence=draw(st.one_of(st.none(), st.floats(0.0, 1.0))),
        country=draw(st.one_of(st.none(), st.sampled_from(["US", "JP", "ZA"]))),
        source=draw(st.one_of(st.none(), st.text(max_size=8))),
        word_alignments=spans,
    )


@settings(max_examples=200, deadline=None)
@given(record=record_strategy())
def test_round_trip_property(record):
    text = write_manifest([record])
    assert parse_manifest(text.split("\n")) == [record]


def test_hypothesis_pairs_parse_and_validate():
    lines = ['{"id":"u1","primary_hyp":"a b","secondary_hyp":"a c"}']
    pairs = parse_hypothesis_pairs(lines)
    assert pairs == [HypothesisPair("u1", "a b", "a c")]
    with pytest.raises(ValidationError, match="exactly keys"):
        parse_hypothesis_pairs(['{"id":"u1","primary_hyp":"a"}'])
    with pytest.raises(ValidationError, match="duplicate id"):
        parse_hypothesis_pairs(lines + lines)


def test_parse_transcripts_accepts_minimal_and_full_rows():
    lines = ['{"id":"u1","transcript":"a b"}',
             '{"id":"u2","audio_path":"x","duration_s":1.0,"transcript":"c"}']
    assert parse_transcripts(lines) == [("u1", "a b"), ("u2", "c")]
    with pytest.raises(ValidationError, match="id"):
        parse_transcripts(['{"transcript":"a"}'])
