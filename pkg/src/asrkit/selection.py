"""Data-selection strategies for pseudo-labeled corpora and their pipeline.

Five stages: words-per-second floor, confidence percentile cut, model
disagreement percentile cut, alignment-based segmentation, and the
rare-word preservation rule with a country exemption.  Stages run in
configured order; statistics for a stage are computed over the records
that survived the previous stages, then decisions are applied.  The first
stage to drop a record wins, so every record carries at most one reason.

Percentile semantics are exact: a cut of fraction f over n scored records
drops exactly floor(f * n) records, smallest (or largest) first under the
total order (score, id).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from ._parallel import ordered_map
from .errors import ConfigError, ValidationError
from .manifest import HypothesisPair, UtteranceRecord, WordSpan
from .metrics import (DEFAULT_NORMALIZER, NormalizerConfig, WordFrequencyTable,
                      edit_distance_tokens, normalize)

STAGE_NAMES = ("wps", "confidence", "disagreement", "segmentation", "rare")


class FilterReason(str, enum.Enum):
    PASS = "pass"
    WPS_LOW = "wps_low"
    CONFIDENCE_LOW = "confidence_low"
    DISAGREEMENT_LOW = "disagreement_low"
    DISAGREEMENT_HIGH = "disagreement_high"
    ALIGN_MISSING = "align_missing"
    SEGMENT_EMPTY = "segment_empty"
    RARE_DATA = "rare_data"


@dataclass(frozen=True)
class FilterDecision:
    id: str
    kept: bool
    reason: FilterReason
    statistic: float | None = None

    def __post_init__(self):
        if self.kept != (self.reason is FilterReason.PASS):
            raise ValidationError(
                f"kept={self.kept} inconsistent with reason={self.reason.value}",
                record_id=self.id)


@dataclass(frozen=True)
class PipelineConfig:
    stages: tuple[str, ...] = STAGE_NAMES
    wps_threshold: float = 0.5
    confidence_fraction: float = 0.20
    disagreement_low_fraction: float = 0.20
    disagreement_high_fraction: float = 0.20
    pairs_strict: bool = True
    max_segment_s: float = 10.0
    rare_min_count: int = 2
    rare_word_fraction: float = 0.25
    exempt_countries_complement: frozenset[str] = frozenset({"US", "GB", "CA", "AU"})
    frequency_coverage: float = 0.90
    normalizer: NormalizerConfig = DEFAULT_NORMALIZER

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "exempt_countries_complement",
                           frozenset(self.exempt_countries_complement))
        unknown = [s for s in self.stages if s not in STAGE_NAMES]
        if unknown:
            raise ConfigError(f"unknown stages {unknown}; known: {list(STAGE_NAMES)}")
        if len(set(self.stages)) != len(self.stages):
            raise ConfigError("duplicate stage names")
        for name in ("confidence_fraction", "disagreement_low_fraction",
                     "disagreement_high_fraction", "rare_word_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.disagreement_low_fraction + self.disagreement_high_fraction > 1.0:
            raise ConfigError("disagreement low + high fractions exceed 1")
        if self.wps_threshold <= 0:
            raise ConfigError("wps_threshold must be > 0")
        if self.max_segment_s <= 0:
            raise ConfigError("max_segment_s must be > 0")
        if self.rare_min_count < 0:
            raise ConfigError("rare_min_count must be >= 0")
        if not 0.0 < self.frequency_coverage <= 1.0:
            raise ConfigError("frequency_coverage must be in (0, 1]")

    @classmethod
    def from_obj(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise ConfigError("pipeline config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown pipeline config keys {sorted(unknown)}")
        kwargs = dict(obj)
        if "normalizer" in kwargs:
            kwargs["normalizer"] = NormalizerConfig.from_obj(kwargs["normalizer"])
        if "exempt_countries_complement" in kwargs:
            kwargs["exempt_countries_complement"] = frozenset(
                kwargs["exempt_countries_complement"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, source) -> "PipelineConfig":
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8") as handle:
                obj = json.load(handle)
        else:
            obj = json.load(source)
        return cls.from_obj(obj)


def _exact_floor(fraction: float, n: int) -> int:
    # floor(fraction * n) computed as if in real arithmetic; the epsilon
    # rescues products such as 0.3 * 10 that land just below an integer.
    return int(math.floor(fraction * n + 1e-9))


def words_per_second(record: UtteranceRecord) -> float:
    """Transcript word count divided by duration."""
    return len(record.transcript.split()) / record.duration_s


def confidence_cut(records: Sequence[UtteranceRecord],
                   fraction: float) -> tuple[float, list[FilterDecision]]:
    """Drop exactly floor(fraction * n) of the n scored records.

    The dropped set is the k smallest under (confidence asc, id asc);
    the returned threshold is the last dropped confidence, or -inf when
    nothing is dropped.  Records without a confidence are kept.
    """
    scored = [(r.confidence, r.id) for r in records if r.confidence is not None]
    scored.sort()
    k = _exact_floor(fraction, len(scored))
    dropped_ids = {rid for _, rid in scored[:k]}
    threshold = scored[k - 1][0] if k else float("-inf")
    decisions = []
    for record in records:
        if record.id in dropped_ids:
            decisions.append(FilterDecision(record.id, kept=False,
                                            reason=FilterReason.CONFIDENCE_LOW,
                                            statistic=record.confidence))
        else:
            decisions.append(FilterDecision(record.id, kept=True,
                                            reason=FilterReason.PASS,
                                            statistic=record.confidence))
    return threshold, decisions


def disagreement_score(pair: HypothesisPair) -> float:
    """Word-level Levenshtein distance normalized by the longer hypothesis."""
    a = pair.primary_hyp.split()
    b = pair.secondary_hyp.split()
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return edit_distance_tokens(a, b) / longest


def _cut_extremes(scored: list[tuple[float, str]], low_fraction: float,
                  high_fraction: float):
    """Indices to drop at each extreme of (score, id)-sorted order.

    Returns (low_ids, high_ids, low_threshold, high_threshold).  Should the
    two sets ever overlap, the overlap is reported only in low_ids.
    """
    n = len(scored)
    order = sorted(range(n), key=lambda i: (scored[i][0], scored[i][1]))
    k_low = _exact_floor(low_fraction, n)
    k_high = _exact_floor(high_fraction, n)
    low = set(order[:k_low])
    high = set(order[n - k_high:] if k_high else []) - low
    low_threshold = scored[order[k_low - 1]][0] if k_low else None
    high_threshold = scored[order[n - k_high]][0] if k_high else None
    return low, high, low_threshold, high_threshold


def disagreement_cut(pairs: Sequence[HypothesisPair], low_fraction: float,
                     high_fraction: float, threads: int = 1) -> list[FilterDecision]:
    """Drop the most-agreeing and most-disagreeing extremes of the pairs.

    Exactly floor(low * n) pairs get reason disagreement_low and
    floor(high * n) get disagreement_high, under (score asc, id asc).
    """
    scores = ordered_map(disagreement_score, pairs, threads=threads)
    scored = [(score, pair.id) for score, pair in zip(scores, pairs)]
    low, high, _, _ = _cut_extremes(scored, low_fraction, high_fraction)
    decisions = []
    for i, pair in enumerate(pairs):
        if i in low:
            reason, kept = FilterReason.DISAGREEMENT_LOW, False
        elif i in high:
            reason, kept = FilterReason.DISAGREEMENT_HIGH, False
        else:
            reason, kept = FilterReason.PASS, True
        decisions.append(FilterDecision(pair.id, kept=kept, reason=reason,
                                        statistic=scores[i]))
    return decisions


def segment_utterance(record: UtteranceRecord,
                      max_segment_s: float) -> list[UtteranceRecord]:
    """Greedy left-to-right packing of word spans into segments.

    A segment starts at the first unconsumed word's start time and extends
    while the next word still ends within max_segment_s of that start.
    A single word longer than max_segment_s becomes an oversize singleton
    segment (detectable as duration_s > max_segment_s).  Child ids are
    ``{parent_id}#k`` with k counting from 0.
    """
    if record.word_alignments is None:
        raise ValidationError("word alignments required for segmentation",
                              record_id=record.id)
    spans = record.word_alignments
    segments: list[UtteranceRecord] = []
    i = 0
    while i < len(spans):
        seg_start = spans[i].start_s
        j = i + 1
        while j < len(spans) and spans[j].end_s - seg_start <= max_segment_s:
            j += 1
        chunk = spans[i:j]
        shifted = tuple(WordSpan(s.word, s.start_s - seg_start, s.end_s - seg_start)
                        for s in chunk)
        segments.append(UtteranceRecord(
            id=f"{record.id}#{len(segments)}",
            audio_path=record.audio_path,
            duration_s=chunk[-1].end_s - seg_start,
            transcript=" ".join(s.word for s in chunk),
            confidence=record.confidence,
            country=record.country,
            source=record.source,
            word_alignments=shifted,
        ))
        i = j
    return segments


def rare_data_keep(record: UtteranceRecord, table: WordFrequencyTable,
                   config: PipelineConfig) -> FilterDecision:
    """Keep a record iff it is country-exempt or carries enough rare words.

    With W normalized words of which R are rare, the record survives iff
    R >= min(rare_min_count, rare_word_fraction * W).  Records whose country
    is absent or outside the configured complement set are always kept.
    """
    if record.country is None or \
            record.country not in config.exempt_countries_complement:
        return FilterDecision(record.id, kept=True, reason=FilterReason.PASS)
    tokens = normalize(record.transcript, config.normalizer)
    n_words = len(tokens)
    n_rare = sum(1 for tok in tokens if tok not in table.common_set)
    needed = min(float(config.rare_min_count),
                 config.rare_word_fraction * n_words)
    if n_rare >= needed:
        return FilterDecision(record.id, kept=True, reason=FilterReason.PASS,
                              statistic=float(n_rare))
    return FilterDecision(record.id, kept=False, reason=FilterReason.RARE_DATA,
                          statistic=float(n_rare))


@dataclass
class PipelineResult:
    kept: list[UtteranceRecord]
    dropped: list[UtteranceRecord]
    report: dict
    dropped_decisions: list[FilterDecision]


def _hours(records: Iterable[UtteranceRecord]) -> float:
    return sum(r.duration_s for r in records) / 3600.0


def _finite_or_none(value):
    if value is None or not math.isfinite(value):
        return None
    return value


def run_pipeline(config: PipelineConfig, records: Sequence[UtteranceRecord],
                 pairs: Sequence[HypothesisPair] | None = None,
                 freq_table: WordFrequencyTable | None = None,
                 threads: int = 1) -> PipelineResult:
    """Run the configured stages and partition the corpus into kept/dropped.

    Output order equals input order (segments in parent position, k
    ascending).  With segmentation enabled, surviving parents are replaced
    by their segments; the report's segmentation entry carries the counts
    needed to reconcile totals.
    """
    if "disagreement" in config.stages and pairs is None:
        raise ConfigError("disagreement stage enabled but no hypothesis pairs given")
    if "rare" in config.stages and freq_table is None:
        raise ConfigError("rare stage enabled but no frequency table given")

    # Keys order the output: (input index,) for parents, + (k,) for segments.
    survivors: list[tuple[tuple[int, ...], UtteranceRecord]] = \
        [((i,), r) for i, r in enumerate(records)]
    dropped: list[tuple[tuple[int, ...], UtteranceRecord, FilterDecision]] = []
    stage_entries: list[dict] = []

    for stage in config.stages:
        recs = [r for _, r in survivors]
        entry: dict = {"stage": stage, "dropped": 0, "threshold": None}
        keep_flags: list[bool]
        decisions: list[FilterDecision | None]

        if stage == "wps":
            rates = ordered_map(words_per_second, recs, threads=threads)
            entry["threshold"] = config.wps_threshold
            decisions = [
                None if rate >= config.wps_threshold else
                FilterDecision(r.id, kept=False, reason=FilterReason.WPS_LOW,
                               statistic=rate)
                for r, rate in zip(recs, rates)
            ]
        elif stage == "confidence":
            threshold, cut = confidence_cut(recs, config.confidence_fraction)
            entry["threshold"] = _finite_or_none(threshold)
            entry["unscored"] = sum(1 for r in recs if r.confidence is None)
            decisions = [None if d.kept else d for d in cut]
        elif stage == "disagreement":
            pair_map = {p.id: p for p in pairs}
            missing = [r.id for r in recs if r.id not in pair_map]
            if missing and config.pairs_strict:
                raise ValidationError(
                    f"no hypothesis pair for ids {missing[:5]} "
                    f"({len(missing)} total); set pairs_strict=false to keep them")
            scored_recs = [r for r in recs if r.id in pair_map]
            scores = ordered_map(
                lambda r: disagreement_score(pair_map[r.id]), scored_recs,
                threads=threads)
            scored = [(s, r.id) for s, r in zip(scores, scored_recs)]
            low, high, low_thr, high_thr = _cut_extremes(
                scored, config.disagreement_low_fraction,
                config.disagreement_high_fraction)
            entry["threshold"] = {"low": low_thr, "high": high_thr}
            entry["unscored"] = len(missing)
            by_id: dict[str, FilterDecision] = {}
            for i, r in enumerate(scored_recs):
                if i in low:
                    by_id[r.id] = FilterDecision(
                        r.id, kept=False, reason=FilterReason.DISAGREEMENT_LOW,
                        statistic=scores[i])
                elif i in high:
                    by_id[r.id] = FilterDecision(
                        r.id, kept=False, reason=FilterReason.DISAGREEMENT_HIGH,
                        statistic=scores[i])
            decisions = [by_id.get(r.id) for r in recs]
        elif stage == "segmentation":
            entry["threshold"] = config.max_segment_s
            new_survivors = []
            parents_segmented = segments_created = oversize = 0
            for key, record in survivors:
                if record.word_alignments is None:
                    dropped.append((key, record, FilterDecision(
                        record.id, kept=False, reason=FilterReason.ALIGN_MISSING)))
                    entry["dropped"] += 1
                    continue
                children = segment_utterance(record, config.max_segment_s)
                if not children:
                    dropped.append((key, record, FilterDecision(
                        record.id, kept=False, reason=FilterReason.SEGMENT_EMPTY)))
                    entry["dropped"] += 1
                    continue
                parents_segmented += 1
                segments_created += len(children)
                oversize += sum(1 for c in children
                                if c.duration_s > config.max_segment_s)
                new_survivors.extend((key + (k,), child)
                                     for k, child in enumerate(children))
            entry.update(parents_segmented=parents_segmented,
                         segments_created=segments_created,
                         oversize_segments=oversize)
            survivors = new_survivors
            stage_entries.append(entry)
            continue
        elif stage == "rare":
            cut = ordered_map(
                lambda r: rare_data_keep(r, freq_table, config), recs,
                threads=threads)
            entry["exempt"] = sum(
                1 for r in recs
                if r.country is None
                or r.country not in config.exempt_countries_complement)
            decisions = [None if d.kept else d for d in cut]
        else:  # pragma: no cover - guarded by PipelineConfig validation
            raise ConfigError(f"unknown stage {stage!r}")

        new_survivors = []
        for (key, record), decision in zip(survivors, decisions):
            if decision is None:
                new_survivors.append((key, record))
            else:
                dropped.append((key, record, decision))
                entry["dropped"] += 1
        survivors = new_survivors
        stage_entries.append(entry)

    dropped.sort(key=lambda item: item[0])
    kept_records = [r for _, r in survivors]
    dropped_records = [r for _, r, _ in dropped]
    report = {
        "input_records": len(records),
        "input_hours": _hours(records),
        "stages": stage_entries,
        "kept_records": len(kept_records),
        "kept_hours": _hours(kept_records),
        "dropped_records": len(dropped_records),
        "dropped_hours": _hours(dropped_records),
    }
    return PipelineResult(kept=kept_records, dropped=dropped_records,
                          report=report,
                          dropped_decisions=[d for _, _, d in dropped])
