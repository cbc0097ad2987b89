"""Corpus data model and bit-exact JSONL (de)serialization.

A manifest is one JSON object per line.  Keys are emitted in a fixed order
and optional fields are omitted when absent, so ``parse(write(x)) == x``
and ``write`` is byte-deterministic.  Records are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import ParseError, ValidationError

_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")

# Fixed serialization order; also the exact accepted key sets.
_RECORD_KEYS = ("id", "audio_path", "duration_s", "transcript",
                "confidence", "country", "source", "word_alignments")
_SPAN_KEYS = ("word", "start_s", "end_s")
_PAIR_KEYS = ("id", "primary_hyp", "secondary_hyp")


def _is_number(value) -> bool:
    # bool is an int subclass; JSON true/false must not pass as numbers.
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class WordSpan:
    """A word and its time span within an utterance, in seconds."""

    word: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if not isinstance(self.word, str) or not self.word:
            raise ValidationError("word must be a non-empty string", field="word")
        for name in ("start_s", "end_s"):
            value = getattr(self, name)
            if not _is_number(value) or not math.isfinite(value):
                raise ValidationError("must be a finite number", field=name)
            object.__setattr__(self, name, float(value))
        if not 0 <= self.start_s < self.end_s:
            raise ValidationError(
                f"requires 0 <= start_s < end_s, got [{self.start_s}, {self.end_s}]",
                field="start_s")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class UtteranceRecord:
    """One corpus row: audio metadata, transcript and optional annotations.

    ``transcript`` words are maximal runs of non-whitespace; punctuation and
    casing are preserved at this layer (the metrics normalizer handles them).
    """

    id: str
    audio_path: str
    duration_s: float
    transcript: str
    confidence: float | None = None
    country: str | None = None
    source: str | None = None
    word_alignments: tuple[WordSpan, ...] | None = None

    def __post_init__(self):
        rid = self.id
        if not isinstance(rid, str) or not rid:
            raise ValidationError("id must be a non-empty string", field="id")
        if not isinstance(self.audio_path, str):
            raise ValidationError("audio_path must be a string",
                                  field="audio_path", record_id=rid)
        if not _is_number(self.duration_s) or not math.isfinite(self.duration_s) \
                or self.duration_s <= 0:
            raise ValidationError("duration_s must be a positive real",
                                  field="duration_s", record_id=rid)
        object.__setattr__(self, "duration_s", float(self.duration_s))
        if not isinstance(self.transcript, str):
            raise ValidationError("transcript must be a string",
                                  field="transcript", record_id=rid)
        if self.confidence is not None:
            if not _is_number(self.confidence) or not 0.0 <= self.confidence <= 1.0:
                raise ValidationError("confidence out of range [0, 1]",
                                      field="confidence", record_id=rid)
            object.__setattr__(self, "confidence", float(self.confidence))
        if self.country is not None:
            if not isinstance(self.country, str) or not _COUNTRY_RE.match(self.country):
                raise ValidationError(
                    "country must be an ISO 3166-1 alpha-2 code (two uppercase letters)",
                    field="country", record_id=rid)
        if self.source is not None and not isinstance(self.source, str):
            raise ValidationError("source must be a string",
                                  field="source", record_id=rid)
        if self.word_alignments is not None:
            spans = tuple(self.word_alignments)
            object.__setattr__(self, "word_alignments", spans)
            self._validate_spans(spans)

    def _validate_spans(self, spans: tuple[WordSpan, ...]):
        rid = self.id
        for prev, cur in zip(spans, spans[1:]):
            if cur.start_s < prev.end_s:
                raise ValidationError(
                    f"word spans overlap or are out of order near {cur.word!r}",
                    field="word_alignments", record_id=rid)
        if spans and spans[-1].end_s > self.duration_s:
            raise ValidationError(
                "word spans extend past duration_s",
                field="word_alignments", record_id=rid)
        if [s.word for s in spans] != self.transcript.split():
            raise ValidationError(
                "aligned words do not match the transcript word sequence",
                field="word_alignments", record_id=rid)

    def words(self) -> list[str]:
        """Transcript words (maximal runs of non-whitespace)."""
        return self.transcript.split()


@dataclass(frozen=True)
class HypothesisPair:
    """Two transcriptions of the same utterance from different models."""

    id: str
    primary_hyp: str
    secondary_hyp: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("id must be a non-empty string", field="id")
        for name in ("primary_hyp", "secondary_hyp"):
            if not isinstance(getattr(self, name), str):
                raise ValidationError("must be a string", field=name,
                                      record_id=self.id)


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            yield from handle
        return
    for line in source:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        yield line


def _parse_json_line(line: str, lineno: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON ({exc.msg})", line=lineno) from exc
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line=lineno)
    return obj


def _record_from_obj(obj: dict, lineno: int) -> UtteranceRecord:
    unknown = set(obj) - set(_RECORD_KEYS)
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}", line=lineno)
    missing = [k for k in ("id", "audio_path", "duration_s", "transcript")
               if k not in obj]
    if missing:
        raise ValidationError(f"missing required keys {missing}", line=lineno)
    spans = obj.get("word_alignments")
    parsed_spans = None
    if spans is not None:
        if not isinstance(spans, list):
            raise ValidationError("word_alignments must be a list",
                                  field="word_alignments", line=lineno)
        parsed_spans = []
        for span_obj in spans:
            if not isinstance(span_obj, dict) or set(span_obj) != set(_SPAN_KEYS):
                raise ValidationError(
                    f"each word span must be an object with keys {list(_SPAN_KEYS)}",
                    field="word_alignments", line=lineno)
            try:
                parsed_spans.append(WordSpan(**span_obj))
            except ValidationError as exc:
                raise ValidationError(str(exc), field="word_alignments",
                                      line=lineno) from exc
        parsed_spans = tuple(parsed_spans)
    try:
        return UtteranceRecord(
            id=obj["id"],
            audio_path=obj["audio_path"],
            duration_s=obj["duration_s"],
            transcript=obj["transcript"],
            confidence=obj.get("confidence"),
            country=obj.get("country"),
            source=obj.get("source"),
            word_alignments=parsed_spans,
        )
    except ValidationError as exc:
        if exc.line is None:
            exc.line = lineno
            raise ValidationError(str(exc), line=lineno) from exc
        raise


def parse_manifest(source) -> list[UtteranceRecord]:
    """Parse JSONL utterance records from a path, file object or line iterable.

    Records are returned in file order.  Raises :class:`ParseError` for
    malformed JSON and :class:`ValidationError` for invariant violations or
    duplicate ids, always naming the offending line.
    """
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        obj = _parse_json_line(line, lineno)
        record = _record_from_obj(obj, lineno)
        if record.id in seen:
            raise ValidationError("duplicate id", record_id=record.id, line=lineno)
        seen.add(record.id)
        records.append(record)
    return records


def record_to_obj(record: UtteranceRecord) -> dict:
    """Plain-dict form of a record with keys in serialization order."""
    obj: dict = {
        "id": record.id,
        "audio_path": record.audio_path,
        "duration_s": record.duration_s,
        "transcript": record.transcript,
    }
    if record.confidence is not None:
        obj["confidence"] = record.confidence
    if record.country is not None:
        obj["country"] = record.country
    if record.source is not None:
        obj["source"] = record.source
    if record.word_alignments is not None:
        obj["word_alignments"] = [
            {"word": s.word, "start_s": s.start_s, "end_s": s.end_s}
            for s in record.word_alignments
        ]
    return obj


def write_manifest(records: Iterable[UtteranceRecord], dest: IO[str] | None = None) -> str | None:
    """Serialize records to JSONL, one object per line, in input order.

    Pure function of its input: same records, byte-identical output.
    Returns the text when ``dest`` is None, otherwise writes to ``dest``.
    """
    lines = []
    for record in records:
        lines.append(json.dumps(record_to_obj(record), ensure_ascii=False,
                                allow_nan=False, separators=(",", ":")))
        lines.append("\n")
    text = "".join(lines)
    if dest is None:
        return text
    dest.write(text)
    return None


def parse_hypothesis_pairs(source) -> list[HypothesisPair]:
    """Parse JSONL hypothesis pairs (keys id/primary_hyp/secondary_hyp)."""
    pairs: list[HypothesisPair] = []
    seen: set[str] = set()
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        obj = _parse_json_line(line, lineno)
        if set(obj) != set(_PAIR_KEYS):
            raise ValidationError(
                f"hypothesis pair must have exactly keys {list(_PAIR_KEYS)}",
                line=lineno)
        try:
            pair = HypothesisPair(**obj)
        except ValidationError as exc:
            raise ValidationError(str(exc), line=lineno) from exc
        if pair.id in seen:
            raise ValidationError("duplicate id", record_id=pair.id, line=lineno)
        seen.add(pair.id)
        pairs.append(pair)
    return pairs


def parse_transcripts(source) -> list[tuple[str, str]]:
    """Parse (id, transcript) rows for scoring.

    Accepts full manifest records or minimal ``{"id": ..., "transcript": ...}``
    objects, so hypothesis files need not fabricate audio metadata.
    """
    rows: list[tuple[str, str]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        obj = _parse_json_line(line, lineno)
        unknown = set(obj) - set(_RECORD_KEYS)
        if unknown:
            raise ValidationError(f"unknown keys {sorted(unknown)}", line=lineno)
        if "id" not in obj or "transcript" not in obj:
            raise ValidationError("need at least keys ['id', 'transcript']",
                                  line=lineno)
        rid, text = obj["id"], obj["transcript"]
        if not isinstance(rid, str) or not rid:
            raise ValidationError("id must be a non-empty string",
                                  field="id", line=lineno)
        if not isinstance(text, str):
            raise ValidationError("transcript must be a string",
                                  field="transcript", record_id=rid, line=lineno)
        if rid in seen:
            raise ValidationError("duplicate id", record_id=rid, line=lineno)
        seen.add(rid)
        rows.append((rid, text))
    return rows
