"""Text normalization, edit alignment, WER, word-frequency tables, rare WER.

WER is aggregated corpus-level (summed S, D, I, N, then one division), not
as a mean of per-utterance rates.  Rare WER counts substitutions and
deletions whose *reference* word falls outside the frequency table's common
set; insertions are excluded because they carry no reference word to
classify.  This choice affects comparability with other tooling, so it is
stated here once and echoed in the README.
"""

from __future__ import annotations

import json
import math
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from ._parallel import ordered_map
from .errors import ConfigError, EmptyCorpusError, ValidationError

# Characters stripped from token edges by the normalizer.
PUNCTUATION = string.punctuation

MATCH = "match"
SUBSTITUTE = "substitute"
DELETE = "delete"
INSERT = "insert"


@dataclass(frozen=True)
class NormalizerConfig:
    lowercase: bool = True
    strip_punctuation: bool = True
    remove_fillers: bool = False
    filler_set: frozenset[str] = frozenset({"uh", "um"})

    def __post_init__(self):
        object.__setattr__(self, "filler_set", frozenset(self.filler_set))
        for filler in self.filler_set:
            if filler != filler.lower() or filler.strip(PUNCTUATION) != filler \
                    or not filler:
                raise ConfigError(
                    f"filler {filler!r} must be lowercase and punctuation-free")

    @classmethod
    def from_obj(cls, obj: dict) -> "NormalizerConfig":
        if not isinstance(obj, dict):
            raise ConfigError("normalizer config must be a JSON object")
        known = {"lowercase", "strip_punctuation", "remove_fillers", "filler_set"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown normalizer keys {sorted(unknown)}")
        kwargs = dict(obj)
        if "filler_set" in kwargs:
            kwargs["filler_set"] = frozenset(kwargs["filler_set"])
        return cls(**kwargs)


DEFAULT_NORMALIZER = NormalizerConfig()


def normalize(text: str, config: NormalizerConfig = DEFAULT_NORMALIZER) -> list[str]:
    """Split on whitespace, then lowercase / strip edge punctuation /
    drop filler tokens per ``config``.  Tokens reduced to empty are removed."""
    tokens = text.split()
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.strip_punctuation:
        tokens = [t.strip(PUNCTUATION) for t in tokens]
    tokens = [t for t in tokens if t]
    if config.remove_fillers:
        tokens = [t for t in tokens if t not in config.filler_set]
    return tokens


@dataclass(frozen=True)
class EditAlignment:
    """Minimal-cost word alignment between a reference and a hypothesis.

    ``ops`` is an ordered list of (op, ref_index, hyp_index) with None for
    the side an op does not touch.  Ties during backtrace are broken
    preferring match > substitute > delete > insert.
    """

    ops: tuple[tuple[str, int | None, int | None], ...]
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def cost(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def matches(self) -> int:
        return self.ref_len - self.substitutions - self.deletions


def _token_ids(*seqs: Sequence[str]) -> list[np.ndarray]:
    vocab: dict[str, int] = {}
    out = []
    for seq in seqs:
        ids = [vocab.setdefault(tok, len(vocab)) for tok in seq]
        out.append(np.asarray(ids, dtype=np.int64))
    return out


def edit_align(ref_tokens: Sequence[str], hyp_tokens: Sequence[str]) -> EditAlignment:
    """Unit-cost Levenshtein alignment with a deterministic backtrace."""
    ref_ids, hyp_ids = _token_ids(ref_tokens, hyp_tokens)
    table = kernels.edit_matrix(ref_ids, hyp_ids)
    i, j = len(ref_tokens), len(hyp_tokens)
    rev_ops: list[tuple[str, int | None, int | None]] = []
    subs = dels = ins = 0
    while i > 0 or j > 0:
        here = table[i, j]
        if i > 0 and j > 0 and ref_tokens[i - 1] == hyp_tokens[j - 1] \
                and here == table[i - 1, j - 1]:
            rev_ops.append((MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and here == table[i - 1, j - 1] + 1:
            rev_ops.append((SUBSTITUTE, i - 1, j - 1))
            subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and here == table[i - 1, j] + 1:
            rev_ops.append((DELETE, i - 1, None))
            dels += 1
            i -= 1
        else:
            rev_ops.append((INSERT, None, j - 1))
            ins += 1
            j -= 1
    return EditAlignment(ops=tuple(reversed(rev_ops)), substitutions=subs,
                         deletions=dels, insertions=ins, ref_len=len(ref_tokens))


def edit_distance_tokens(a_tokens: Sequence[str], b_tokens: Sequence[str]) -> int:
    """Word-level Levenshtein distance (no backtrace)."""
    a_ids, b_ids = _token_ids(a_tokens, b_tokens)
    return kernels.edit_distance(a_ids, b_ids)


def wer(alignments: Iterable[EditAlignment]) -> dict:
    """Corpus-level WER: sum S, D, I, N over utterances, then divide once."""
    subs = dels = ins = ref_len = 0
    for alignment in alignments:
        subs += alignment.substitutions
        dels += alignment.deletions
        ins += alignment.insertions
        ref_len += alignment.ref_len
    if ref_len == 0:
        raise EmptyCorpusError("empty reference corpus (N = 0)")
    return {"S": subs, "D": dels, "I": ins, "N": ref_len,
            "wer": (subs + dels + ins) / ref_len}


@dataclass(frozen=True)
class WordFrequencyTable:
    """Word counts plus the common set covering ``coverage`` of total mass.

    The common set is the minimal prefix of words sorted by (count desc,
    word asc) whose cumulative count reaches coverage * total; the word
    crossing the boundary is included.
    """

    counts: dict[str, int]
    total: int
    coverage: float
    common_set: frozenset[str] = field(repr=False)

    def is_common(self, token: str) -> bool:
        return token in self.common_set

    def sorted_words(self) -> list[tuple[str, int]]:
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))


def build_freq_table(records, normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
                     coverage: float = 0.9) -> WordFrequencyTable:
    """Count normalized tokens over all transcripts and derive the common set."""
    if not 0.0 < coverage <= 1.0:
        raise ConfigError(f"coverage must be in (0, 1], got {coverage}")
    counts: Counter[str] = Counter()
    for record in records:
        counts.update(normalize(record.transcript, normalizer))
    total = sum(counts.values())
    if total == 0:
        raise EmptyCorpusError("no tokens in corpus; cannot build frequency table")
    # Integer mass target; the epsilon absorbs binary-float artifacts such
    # as 0.9 * 10 landing a hair above 9.
    target = math.ceil(coverage * total - 1e-9)
    common = set()
    cumulative = 0
    for word, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if cumulative >= target:
            break
        common.add(word)
        cumulative += count
    return WordFrequencyTable(counts=dict(counts), total=total,
                              coverage=coverage, common_set=frozenset(common))


def is_rare(word: str, table: WordFrequencyTable,
            normalizer: NormalizerConfig | None = None) -> bool:
    """True iff the (normalized) word is outside the common set.

    Unseen words are rare; a word that normalizes away entirely is rare.
    Pass ``normalizer=None`` when ``word`` is already a normalized token.
    """
    tokens = [word] if normalizer is None else normalize(word, normalizer)
    return all(t not in table.common_set for t in tokens) if tokens else True


def write_freq_table(table: WordFrequencyTable) -> str:
    """Serialize a table to its JSON file format (deterministic bytes)."""
    words = [{"w": w, "count": c} for w, c in table.sorted_words()]
    obj = {
        "coverage": table.coverage,
        "total": table.total,
        "words": words,
        "common_set_size": len(table.common_set),
    }
    return json.dumps(obj, ensure_ascii=False, allow_nan=False, indent=2) + "\n"


def load_freq_table(source) -> WordFrequencyTable:
    """Load a table written by :func:`write_freq_table`."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            obj = json.load(handle)
    else:
        obj = json.load(source)
    try:
        words = obj["words"]
        counts = {entry["w"]: int(entry["count"]) for entry in words}
        total = int(obj["total"])
        coverage = float(obj["coverage"])
        size = int(obj["common_set_size"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed frequency table file: {exc}") from exc
    if len(counts) != len(words):
        raise ValidationError("frequency table contains duplicate words")
    if sum(counts.values()) != total:
        raise ValidationError("frequency table total does not match counts")
    if not 0 <= size <= len(words):
        raise ValidationError("frequency table common_set_size out of range")
    common = frozenset(entry["w"] for entry in words[:size])
    return WordFrequencyTable(counts=counts, total=total, coverage=coverage,
                              common_set=common)


def _as_id_text(rows) -> list[tuple[str, str]]:
    out = []
    for row in rows:
        if isinstance(row, tuple):
            out.append(row)
        else:
            out.append((row.id, row.transcript))
    return out


def rare_wer(ref_rows, hyp_rows, table: WordFrequencyTable,
             normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
             threads: int = 1) -> dict:
    """WER restricted to rare reference words.

    Counts substitutions/deletions whose reference word is rare; N_r is the
    number of rare reference words.  Requires ref and hyp to carry exactly
    the same ids; raises when N_r ends up zero.
    """
    report = corpus_score(ref_rows, hyp_rows, normalizer=normalizer,
                          table=table, threads=threads)
    return {k: report[k] for k in ("S_r", "D_r", "N_r", "rare_wer")}


def corpus_score(ref_rows, hyp_rows, normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
                 table: WordFrequencyTable | None = None, threads: int = 1) -> dict:
    """Full scoring report: corpus WER plus rare WER when a table is given."""
    refs = _as_id_text(ref_rows)
    hyps = dict(_as_id_text(hyp_rows))
    ref_ids = [rid for rid, _ in refs]
    missing = [rid for rid in ref_ids if rid not in hyps]
    extra = sorted(set(hyps) - set(ref_ids))
    if missing or extra:
        raise ValidationError(
            f"ref/hyp ids do not match (missing hyp for {missing[:5]}, "
            f"unmatched hyp ids {extra[:5]})")

    def align_one(item):
        rid, ref_text = item
        ref_tokens = normalize(ref_text, normalizer)
        hyp_tokens = normalize(hyps[rid], normalizer)
        return ref_tokens, edit_align(ref_tokens, hyp_tokens)

    aligned = ordered_map(align_one, refs, threads=threads)
    report = wer(alignment for _, alignment in aligned)
    if table is None:
        return report

    rare_subs = rare_dels = rare_refs = 0
    for ref_tokens, alignment in aligned:
        rare_flags = [tok not in table.common_set for tok in ref_tokens]
        rare_refs += sum(rare_flags)
        for op, ref_idx, _ in alignment.ops:
            if op == SUBSTITUTE and rare_flags[ref_idx]:
                rare_subs += 1
            elif op == DELETE and rare_flags[ref_idx]:
                rare_dels += 1
    if rare_refs == 0:
        raise EmptyCorpusError("rare WER undefined: N_r=0 "
                               "(no rare reference words under this table)")
    report.update({"S_r": rare_subs, "D_r": rare_dels, "N_r": rare_refs,
                   "rare_wer": (rare_subs + rare_dels) / rare_refs})
    return report
