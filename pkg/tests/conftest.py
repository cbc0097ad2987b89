"""Shared random-data generators (seeded, reproducible)."""

from __future__ import annotations

import random

import numpy as np
import pytest

from asrkit.manifest import HypothesisPair, UtteranceRecord, WordSpan
from asrkit.rnnt import AlignmentBand, RnntInstance

WORDS = ("the", "a", "cat", "sat", "on", "mat", "Zanzibar", "quokka",
         "GAAP", "uh", "um", "hello,", "world.", "naïve", "재밌다", "x2")
COUNTRIES = ("US", "GB", "CA", "AU", "DE", "FR", "IN", "BR", "KR", "NG")
SOURCES = ("video", "portal", "assistant", "dictation", None)


def random_record(rng: random.Random, rid: str,
                  with_alignments: bool | None = None) -> UtteranceRecord:
    """One random valid record; alignments (when drawn) match the transcript."""
    if with_alignments is None:
        with_alignments = rng.random() < 0.5
    n_words = rng.randint(0, 8)
    words = [rng.choice(WORDS) for _ in range(n_words)]
    confidence = round(rng.random(), 6) if rng.random() < 0.7 else None
    country = rng.choice(COUNTRIES) if rng.random() < 0.8 else None
    spans = None
    if with_alignments:
        # Integer-tenth timestamps keep the span arithmetic exact.
        cursor = rng.randint(0, 20)
        built = []
        for word in words:
            start = cursor + rng.randint(0, 10)
            end = start + rng.randint(1, 30)
            built.append(WordSpan(word, start / 10.0, end / 10.0))
            cursor = end
        spans = tuple(built)
        duration = (cursor + rng.randint(1, 50)) / 10.0
    else:
        duration = rng.randint(1, 600) / 10.0
    return UtteranceRecord(
        id=rid,
        audio_path=f"audio/{rid}.wav",
        duration_s=duration,
        transcript=" ".join(words),
        confidence=confidence,
        country=country,
        source=rng.choice(SOURCES),
        word_alignments=spans,
    )


def random_records(seed: int, count: int, **kwargs) -> list[UtteranceRecord]:
    rng = random.Random(seed)
    return [random_record(rng, f"utt{i:05d}", **kwargs) for i in range(count)]


def pairs_for(records, seed: int) -> list[HypothesisPair]:
    """A hypothesis pair per record, with varied disagreement."""
    rng = random.Random(seed)
    pairs = []
    for record in records:
        primary = [rng.choice(WORDS) for _ in range(rng.randint(1, 8))]
        secondary = [w if rng.random() > 0.3 else rng.choice(WORDS)
                     for w in primary]
        if rng.random() < 0.2:
            secondary = secondary + [rng.choice(WORDS)]
        pairs.append(HypothesisPair(record.id, " ".join(primary),
                                    " ".join(secondary)))
    return pairs


def random_instance(rng: np.random.Generator, max_frames: int = 6,
                    max_tokens: int = 4, max_vocab: int = 5) -> RnntInstance:
    n_frames = int(rng.integers(1, max_frames + 1))
    n_tokens = int(rng.integers(0, max_tokens + 1))
    n_vocab = int(rng.integers(2, max_vocab + 1))
    logits = rng.normal(scale=2.0, size=(n_frames, n_tokens + 1, n_vocab))
    targets = tuple(int(t) for t in rng.integers(1, n_vocab, size=n_tokens))
    return RnntInstance(logits=logits, targets=targets)


def feasible_band(rng: np.random.Generator, instance: RnntInstance,
                  max_buffer: int = 3) -> AlignmentBand:
    """A band guaranteed to admit at least one complete path.

    Sufficient conditions under node-validity pruning: consecutive aligned
    frames no further apart than left+right buffer, and the last window
    reaching the final frame.
    """
    n_frames, n_tokens = instance.n_frames, instance.n_tokens
    frames = tuple(sorted(int(f) for f in
                          rng.integers(0, n_frames, size=n_tokens)))
    left = int(rng.integers(0, max_buffer + 1))
    right = int(rng.integers(0, max_buffer + 1))
    if n_tokens:
        max_gap = max((b - a for a, b in zip(frames, frames[1:])), default=0)
        right = max(right, (n_frames - 1) - frames[-1], max_gap - left)
    return AlignmentBand(token_frames=frames, left_buffer=left,
                         right_buffer=right)


@pytest.fixture
def np_rng():
    return np.random.default_rng(20260810)
