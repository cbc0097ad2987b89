"""Independent brute-force oracles used to check the real implementations.

Everything here is deliberately written with plain Python (math module,
recursion, exhaustive enumeration) and shares no code with the package
internals it is checking.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache


def levenshtein_recursive(a, b) -> int:
    """Textbook recursive edit distance (memoized)."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def dist(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(dist(i - 1, j) + 1,
                   dist(i, j - 1) + 1,
                   dist(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    result = dist(len(a), len(b))
    dist.cache_clear()
    return result


def _log_softmax_cell(row, v) -> float:
    m = max(float(x) for x in row)
    denom = math.fsum(math.exp(float(x) - m) for x in row)
    return float(row[v]) - m - math.log(denom)


def transducer_loss_by_enumeration(logits, targets, mask=None) -> float:
    """Loss computed by explicitly summing every monotone alignment.

    An alignment assigns token u (1-based) an emission frame e_u with
    e_1 <= ... <= e_U.  Its probability is the product of the label steps
    plus one blank per frame taken at the lattice row active when the frame
    ends.  ``mask``, when given, is a (T, U+1) validity grid; alignments
    visiting an invalid node are excluded.  Returns inf if nothing survives.
    """
    n_frames = len(logits)
    n_rows = len(logits[0])
    n_tokens = n_rows - 1
    blank = 0

    def path_logprob(emit_frames):
        total = 0.0
        u = 0
        for f in range(n_frames):
            while u < n_tokens and emit_frames[u] == f:
                # label step (f, u) -> (f, u+1)
                if mask is not None and not mask[f][u + 1]:
                    return None
                total += _log_softmax_cell(logits[f][u], targets[u])
                u += 1
            # blank step (f, u) -> (f+1, u); the final blank leaves the lattice
            if f + 1 < n_frames and mask is not None and not mask[f + 1][u]:
                return None
            total += _log_softmax_cell(logits[f][u], blank)
        return total if u == n_tokens else None

    terms = []
    for emit_frames in itertools.combinations_with_replacement(
            range(n_frames), n_tokens):
        lp = path_logprob(emit_frames)
        if lp is not None:
            terms.append(lp)
    if not terms:
        return math.inf
    top = max(terms)
    return -(top + math.log(math.fsum(math.exp(x - top) for x in terms)))


def count_monotone_alignments(n_frames: int, n_tokens: int) -> int:
    return math.comb(n_frames - 1 + n_tokens, n_tokens)


def rare_rule_keep(n_words: int, n_rare: int, country,
                   complement=("US", "GB", "CA", "AU")) -> bool:
    """One-line reimplementation of the rare-data preservation rule."""
    if country is None or country not in complement:
        return True
    return n_rare >= min(2, 0.25 * n_words)
