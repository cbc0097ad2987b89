# cython: language_level=3
"""Compiled kernel backend: C loops for the lattice recursion and edit DP.

Mirrors ``_pure`` exactly; keep both in sync when touching the math.
"""

import numpy as np

from libc.math cimport exp, log, log1p, HUGE_VAL

cdef double NEG_INF = -HUGE_VAL


cdef inline double logadd(double a, double b) nogil:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        return b + log1p(exp(a - b))
    return a + log1p(exp(b - a))


def transducer_loss(object logits_in, object targets_in, object mask_in,
                    bint with_grad):
    """See ``asrkit.kernels._pure.transducer_loss``; same contract."""
    cdef double[:, :, ::1] logits = np.ascontiguousarray(logits_in, dtype=np.float64)
    cdef long long[::1] targets = np.ascontiguousarray(targets_in, dtype=np.int64)
    cdef unsigned char[:, ::1] mask = np.ascontiguousarray(mask_in, dtype=np.uint8)

    cdef Py_ssize_t n_frames = logits.shape[0]
    cdef Py_ssize_t n_rows = logits.shape[1]
    cdef Py_ssize_t n_vocab = logits.shape[2]
    cdef Py_ssize_t n_tokens = n_rows - 1

    lp_blank_arr = np.empty((n_frames, n_rows), dtype=np.float64)
    lp_label_arr = np.empty((n_frames, n_rows), dtype=np.float64)
    logz_arr = np.empty((n_frames, n_rows), dtype=np.float64)
    alpha_arr = np.full((n_frames, n_rows), NEG_INF, dtype=np.float64)
    cdef double[:, ::1] lp_blank = lp_blank_arr
    cdef double[:, ::1] lp_label = lp_label_arr
    cdef double[:, ::1] logz = logz_arr
    cdef double[:, ::1] alpha = alpha_arr

    cdef Py_ssize_t t, u, v
    cdef double m, s, lz, from_blank, from_label, logp

    with nogil:
        for t in range(n_frames):
            for u in range(n_rows):
                m = logits[t, u, 0]
                for v in range(1, n_vocab):
                    if logits[t, u, v] > m:
                        m = logits[t, u, v]
                s = 0.0
                for v in range(n_vocab):
                    s += exp(logits[t, u, v] - m)
                lz = m + log(s)
                logz[t, u] = lz
                lp_blank[t, u] = logits[t, u, 0] - lz
                if u < n_tokens:
                    lp_label[t, u] = logits[t, u, targets[u]] - lz
                else:
                    lp_label[t, u] = NEG_INF

        if mask[0, 0]:
            alpha[0, 0] = 0.0
        for t in range(n_frames):
            for u in range(n_rows):
                if (t == 0 and u == 0) or not mask[t, u]:
                    continue
                from_blank = alpha[t - 1, u] + lp_blank[t - 1, u] if t > 0 else NEG_INF
                from_label = alpha[t, u - 1] + lp_label[t, u - 1] if u > 0 else NEG_INF
                alpha[t, u] = logadd(from_blank, from_label)

        if mask[n_frames - 1, n_tokens]:
            logp = alpha[n_frames - 1, n_tokens] + lp_blank[n_frames - 1, n_tokens]
        else:
            logp = NEG_INF

    if not with_grad:
        return -logp, None

    grad_arr = np.zeros((n_frames, n_rows, n_vocab), dtype=np.float64)
    if logp == NEG_INF:
        return -logp, grad_arr

    beta_arr = np.full((n_frames, n_rows), NEG_INF, dtype=np.float64)
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, :, ::1] grad = grad_arr
    cdef double to_blank, to_label, occ_blank, occ_label, occ

    with nogil:
        beta[n_frames - 1, n_tokens] = lp_blank[n_frames - 1, n_tokens]
        for t in range(n_frames - 1, -1, -1):
            for u in range(n_tokens, -1, -1):
                if (t == n_frames - 1 and u == n_tokens) or not mask[t, u]:
                    continue
                to_blank = beta[t + 1, u] + lp_blank[t, u] \
                    if t + 1 < n_frames and mask[t + 1, u] else NEG_INF
                to_label = beta[t, u + 1] + lp_label[t, u] \
                    if u < n_tokens and mask[t, u + 1] else NEG_INF
                beta[t, u] = logadd(to_blank, to_label)

        for t in range(n_frames):
            for u in range(n_rows):
                if not mask[t, u]:
                    continue
                if t == n_frames - 1 and u == n_tokens:
                    occ_blank = exp(alpha[t, u] + lp_blank[t, u] - logp)
                elif t + 1 < n_frames:
                    occ_blank = exp(alpha[t, u] + lp_blank[t, u]
                                    + beta[t + 1, u] - logp)
                else:
                    occ_blank = 0.0
                if u < n_tokens:
                    occ_label = exp(alpha[t, u] + lp_label[t, u]
                                    + beta[t, u + 1] - logp)
                else:
                    occ_label = 0.0
                occ = occ_blank + occ_label
                if occ == 0.0:
                    continue
                for v in range(n_vocab):
                    grad[t, u, v] = occ * exp(logits[t, u, v] - logz[t, u])
                grad[t, u, 0] -= occ_blank
                if u < n_tokens:
                    grad[t, u, targets[u]] -= occ_label
    return -logp, grad_arr


def edit_distance(object a_in, object b_in) -> int:
    """Word-level Levenshtein distance between two int-id sequences."""
    cdef long long[::1] a = np.ascontiguousarray(a_in, dtype=np.int64)
    cdef long long[::1] b = np.ascontiguousarray(b_in, dtype=np.int64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef int[::1] row = np.arange(m + 1, dtype=np.int32)
    cdef Py_ssize_t i, j
    cdef int diag, up, best, cur
    with nogil:
        for i in range(1, n + 1):
            diag = row[0]
            row[0] = <int>i
            for j in range(1, m + 1):
                up = row[j]
                best = diag + (0 if a[i - 1] == b[j - 1] else 1)
                cur = up + 1
                if cur < best:
                    best = cur
                cur = row[j - 1] + 1
                if cur < best:
                    best = cur
                row[j] = best
                diag = up
    return int(row[m])


def edit_matrix(object a_in, object b_in):
    """Full (len(a)+1, len(b)+1) Levenshtein cost table, for backtrace."""
    cdef long long[::1] a = np.ascontiguousarray(a_in, dtype=np.int64)
    cdef long long[::1] b = np.ascontiguousarray(b_in, dtype=np.int64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    table_arr = np.empty((n + 1, m + 1), dtype=np.int32)
    cdef int[:, ::1] table = table_arr
    cdef Py_ssize_t i, j
    cdef int best, cur
    with nogil:
        for j in range(m + 1):
            table[0, j] = <int>j
        for i in range(1, n + 1):
            table[i, 0] = <int>i
            for j in range(1, m + 1):
                best = table[i - 1, j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
                cur = table[i - 1, j] + 1
                if cur < best:
                    best = cur
                cur = table[i, j - 1] + 1
                if cur < best:
                    best = cur
                table[i, j] = best
    return table_arr
