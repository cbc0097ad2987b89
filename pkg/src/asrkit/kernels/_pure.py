"""Pure NumPy kernel backend.

Fallback used when the compiled extension is unavailable.  Must stay
numerically interchangeable with ``_fast``: same recursions, same
summation order per cell, double precision throughout.
"""

from __future__ import annotations

import numpy as np

NEG_INF = float("-inf")


def _log_probs(logits: np.ndarray, targets: np.ndarray):
    """Per-cell log-softmax terms needed by the lattice recursion.

    Returns (lp_blank[T, U+1], lp_label[T, U], logz[T, U+1]) where
    lp_label[t, u] is the log-probability of emitting token u+1 from
    lattice row u.
    """
    m = logits.max(axis=2, keepdims=True)
    logz = np.log(np.exp(logits - m).sum(axis=2)) + m[:, :, 0]
    lp_blank = logits[:, :, 0] - logz
    n_tokens = targets.shape[0]
    if n_tokens:
        picked = np.take_along_axis(
            logits[:, :n_tokens, :], targets[None, :, None], axis=2)[:, :, 0]
        lp_label = picked - logz[:, :n_tokens]
    else:
        lp_label = np.zeros((logits.shape[0], 0))
    return lp_blank, lp_label, logz


def transducer_loss(logits: np.ndarray, targets: np.ndarray,
                    mask: np.ndarray, with_grad: bool):
    """Negative log-probability of all lattice paths surviving ``mask``.

    logits: float64 (T, U+1, V) raw scores, blank id 0.
    targets: int64 (U,) token ids emitted along the label axis.
    mask: uint8 (T, U+1); cells with 0 are pruned from the lattice.

    Returns (loss, grad) where grad is d(loss)/d(logits) or None.  When the
    mask admits no complete path the loss is +inf and grad (if requested)
    is all zeros; the caller decides how to surface that.
    """
    n_frames, n_rows, _ = logits.shape
    n_tokens = n_rows - 1
    lp_blank, lp_label, logz = _log_probs(logits, targets)
    valid = mask.astype(bool)

    alpha = np.full((n_frames, n_rows), NEG_INF)
    if valid[0, 0]:
        alpha[0, 0] = 0.0
    for t in range(n_frames):
        for u in range(n_tokens + 1):
            if (t == 0 and u == 0) or not valid[t, u]:
                continue
            from_blank = alpha[t - 1, u] + lp_blank[t - 1, u] if t > 0 else NEG_INF
            from_label = alpha[t, u - 1] + lp_label[t, u - 1] if u > 0 else NEG_INF
            alpha[t, u] = np.logaddexp(from_blank, from_label)

    if valid[n_frames - 1, n_tokens]:
        logp = alpha[n_frames - 1, n_tokens] + lp_blank[n_frames - 1, n_tokens]
    else:
        logp = NEG_INF
    loss = -logp

    if not with_grad:
        return loss, None
    grad = np.zeros_like(logits)
    if logp == NEG_INF:
        return loss, grad

    beta = np.full((n_frames, n_rows), NEG_INF)
    beta[n_frames - 1, n_tokens] = lp_blank[n_frames - 1, n_tokens]
    for t in range(n_frames - 1, -1, -1):
        for u in range(n_tokens, -1, -1):
            if (t == n_frames - 1 and u == n_tokens) or not valid[t, u]:
                continue
            to_blank = beta[t + 1, u] + lp_blank[t, u] \
                if t + 1 < n_frames and valid[t + 1, u] else NEG_INF
            to_label = beta[t, u + 1] + lp_label[t, u] \
                if u < n_tokens and valid[t, u + 1] else NEG_INF
            beta[t, u] = np.logaddexp(to_blank, to_label)

    # Posterior occupancy of each emission, zero at pruned/unreachable cells.
    occ_blank = np.zeros((n_frames, n_rows))
    if n_frames > 1:
        occ_blank[:-1, :] = np.exp(alpha[:-1, :] + lp_blank[:-1, :]
                                   + beta[1:, :] - logp)
    occ_blank[n_frames - 1, n_tokens] = np.exp(
        alpha[n_frames - 1, n_tokens] + lp_blank[n_frames - 1, n_tokens] - logp)
    occ_label = np.zeros((n_frames, n_rows))
    if n_tokens:
        occ_label[:, :n_tokens] = np.exp(alpha[:, :n_tokens] + lp_label
                                         + beta[:, 1:] - logp)

    occupancy = occ_blank + occ_label
    grad = occupancy[:, :, None] * np.exp(logits - logz[:, :, None])
    grad[:, :, 0] -= occ_blank
    for u in range(n_tokens):
        grad[:, u, targets[u]] -= occ_label[:, u]
    return loss, grad


def _edit_rows(a: np.ndarray, b: np.ndarray):
    """Yield successive rows of the Levenshtein DP table for a vs b."""
    m = b.shape[0]
    idx = np.arange(m + 1, dtype=np.int32)
    row = idx.copy()
    yield row
    for i in range(1, a.shape[0] + 1):
        sub = row[:-1] + (b != a[i - 1])
        best = np.minimum(row[1:] + 1, sub)
        best = np.concatenate(([np.int32(i)], best))
        # Fold in insertion chains: row[j] = min_{k<=j} best[k] + (j - k).
        row = (np.minimum.accumulate(best - idx) + idx).astype(np.int32)
        yield row


def edit_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Word-level Levenshtein distance between two int-id sequences."""
    for row in _edit_rows(a, b):
        pass
    return int(row[-1])


def edit_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full (len(a)+1, len(b)+1) Levenshtein cost table, for backtrace."""
    return np.stack(list(_edit_rows(a, b)))
