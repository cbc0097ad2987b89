"""Transducer loss over the full lattice and its alignment-restricted variant.

The lattice has one node per (frame t, emitted-token count u); each node
holds a log-softmax over the vocabulary, blank id 0.  Forward recursion:

    alpha(0, 0) = 0
    alpha(t, u) = logaddexp(alpha(t-1, u) + blank(t-1, u),
                            alpha(t, u-1) + label_u(t, u-1))
    loss = -(alpha(T-1, U) + blank(T-1, U))

The restricted variant prunes node validity only: row u >= 1 keeps frames
within [a_u - left_buffer, a_u + right_buffer] around the token's aligned
frame; row 0 is never pruned so a pure-blank prefix always exists.  Any
transition into a pruned node contributes -inf, so the restricted loss is
always >= the full loss.  A band that admits no complete path raises
InfeasibleBandError rather than returning inf or NaN.

Everything runs in double precision; gradients are analytic (beta
recursion) and can be audited with :func:`grad_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InfeasibleBandError, ValidationError
from .manifest import WordSpan

BLANK_ID = 0


@dataclass(frozen=True)
class RnntInstance:
    """Raw logits of shape (frames, tokens+1, vocab) plus the target ids."""

    logits: np.ndarray
    targets: tuple[int, ...]

    def __post_init__(self):
        logits = np.ascontiguousarray(self.logits, dtype=np.float64)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if logits.ndim != 3:
            raise ValidationError(
                f"logits must be 3-dimensional, got shape {logits.shape}")
        n_frames, n_rows, n_vocab = logits.shape
        if n_frames < 1:
            raise ValidationError("need at least one frame")
        if n_vocab < 2:
            raise ValidationError("vocabulary must include blank plus one token")
        if n_rows != len(self.targets) + 1:
            raise ValidationError(
                f"logits have {n_rows} label rows but {len(self.targets)} targets")
        if not np.isfinite(logits).all():
            raise ValidationError("logits must be finite")
        for t in self.targets:
            if not 1 <= t < n_vocab:
                raise ValidationError(
                    f"target id {t} outside [1, {n_vocab - 1}] (blank id is 0)")

    @property
    def n_frames(self) -> int:
        return self.logits.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.logits.shape[1] - 1

    @property
    def vocab_size(self) -> int:
        return self.logits.shape[2]


@dataclass(frozen=True)
class AlignmentBand:
    """Per-token aligned frames and the buffer widths around them."""

    token_frames: tuple[int, ...]
    left_buffer: int = 15
    right_buffer: int = 15

    def __post_init__(self):
        frames = tuple(int(f) for f in self.token_frames)
        object.__setattr__(self, "token_frames", frames)
        if any(f < 0 for f in frames):
            raise ValidationError("token frames must be >= 0")
        if any(nxt < cur for cur, nxt in zip(frames, frames[1:])):
            raise ValidationError("token frames must be non-decreasing")
        if self.left_buffer < 0 or self.right_buffer < 0:
            raise ValidationError("buffers must be >= 0")


@dataclass(frozen=True)
class LossResult:
    loss: float
    gradients: np.ndarray | None
    valid_cells: int


def band_mask(n_frames: int, n_tokens: int, band: AlignmentBand | None) -> np.ndarray:
    """uint8 validity mask over the (frames, tokens+1) lattice."""
    mask = np.zeros((n_frames, n_tokens + 1), dtype=np.uint8)
    mask[:, 0] = 1
    if band is None:
        mask[:, :] = 1
        return mask
    if len(band.token_frames) != n_tokens:
        raise ValidationError(
            f"band has {len(band.token_frames)} token frames, "
            f"instance has {n_tokens} targets")
    for u, frame in enumerate(band.token_frames, start=1):
        if frame >= n_frames:
            raise ValidationError(
                f"token frame {frame} outside [0, {n_frames - 1}]")
        lo = max(0, frame - band.left_buffer)
        hi = min(n_frames - 1, frame + band.right_buffer)
        mask[lo:hi + 1, u] = 1
    return mask


def _run(instance: RnntInstance, mask: np.ndarray, with_grad: bool) -> LossResult:
    targets = np.asarray(instance.targets, dtype=np.int64)
    loss, grad = kernels.transducer_loss(instance.logits, targets, mask, with_grad)
    return LossResult(loss=float(loss), gradients=grad,
                      valid_cells=int(mask.sum()))


def rnnt_loss_full(instance: RnntInstance, with_grad: bool = False) -> LossResult:
    """Loss over the whole lattice (no pruning)."""
    mask = band_mask(instance.n_frames, instance.n_tokens, None)
    return _run(instance, mask, with_grad)


def rnnt_loss_restricted(instance: RnntInstance, band: AlignmentBand,
                         with_grad: bool = False) -> LossResult:
    """Loss over the band-restricted lattice; >= the full loss."""
    mask = band_mask(instance.n_frames, instance.n_tokens, band)
    result = _run(instance, mask, with_grad)
    if not math.isfinite(result.loss):
        raise InfeasibleBandError(
            "infeasible band: no complete lattice path survives the pruning "
            f"(token frames {band.token_frames}, buffers "
            f"{band.left_buffer}/{band.right_buffer}, frames {instance.n_frames})")
    return result


def band_from_word_spans(word_spans: Sequence[WordSpan],
                         tokens_per_word: Sequence[int],
                         frame_rate_hz: float, n_frames: int,
                         left_buffer: int = 15,
                         right_buffer: int = 15) -> AlignmentBand:
    """Spread each word's tokens evenly over its span and floor to frames.

    Token j of a k-token word spanning [start, end) sits at
    start + j * (end - start) / k seconds; frames are clamped to
    [0, n_frames - 1] and forced non-decreasing.
    """
    if len(word_spans) != len(tokens_per_word):
        raise ValidationError(
            f"{len(word_spans)} word spans but {len(tokens_per_word)} token counts")
    if frame_rate_hz <= 0:
        raise ValidationError("frame rate must be positive")
    if n_frames < 1:
        raise ValidationError("need at least one frame")
    frames: list[int] = []
    prev = 0
    for span, count in zip(word_spans, tokens_per_word):
        if count < 1:
            raise ValidationError(f"word {span.word!r} must carry >= 1 tokens")
        step = (span.end_s - span.start_s) / count
        for j in range(count):
            frame = math.floor((span.start_s + j * step) * frame_rate_hz)
            frame = min(max(frame, prev), n_frames - 1)
            frames.append(frame)
            prev = frame
    return AlignmentBand(token_frames=tuple(frames),
                         left_buffer=left_buffer, right_buffer=right_buffer)


def cell_count(n_frames: int, n_tokens: int,
               band: AlignmentBand | None = None) -> dict:
    """Lattice cell counts: the full grid vs the band-restricted one."""
    full = n_frames * (n_tokens + 1)
    if band is None:
        return {"full": full, "restricted": full}
    if len(band.token_frames) != n_tokens:
        raise ValidationError(
            f"band has {len(band.token_frames)} token frames, "
            f"expected {n_tokens}")
    restricted = n_frames
    for frame in band.token_frames:
        lo = max(0, frame - band.left_buffer)
        hi = min(n_frames - 1, frame + band.right_buffer)
        restricted += hi - lo + 1
    return {"full": full, "restricted": restricted}


def grad_check(instance: RnntInstance, band: AlignmentBand | None = None,
               epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    The relative error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    mask = band_mask(instance.n_frames, instance.n_tokens, band)
    targets = np.asarray(instance.targets, dtype=np.int64)
    loss, grad = kernels.transducer_loss(instance.logits, targets, mask, True)
    if not math.isfinite(loss):
        raise InfeasibleBandError("cannot gradient-check an infeasible band")
    logits = instance.logits.copy()
    max_rel = 0.0
    for idx in np.ndindex(logits.shape):
        original = logits[idx]
        logits[idx] = original + epsilon
        plus, _ = kernels.transducer_loss(logits, targets, mask, False)
        logits[idx] = original - epsilon
        minus, _ = kernels.transducer_loss(logits, targets, mask, False)
        logits[idx] = original
        numeric = (plus - minus) / (2.0 * epsilon)
        analytic = grad[idx]
        rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel


def count_alignments(n_frames: int, n_tokens: int) -> int:
    """Number of monotone alignments = lattice paths ending in the final blank."""
    return math.comb(n_frames - 1 + n_tokens, n_tokens)


def enumerate_loss(instance: RnntInstance,
                   band: AlignmentBand | None = None) -> float:
    """Brute-force loss: explicitly sum every alignment's probability.

    Walks all blank/label interleavings through valid nodes, accumulating
    per-path log-probabilities with plain Python math (its own softmax),
    so it shares no code path with the lattice recursion.  Returns inf when
    no complete path exists.
    """
    n_frames, n_tokens = instance.n_frames, instance.n_tokens
    mask = band_mask(n_frames, n_tokens, band)
    logits = instance.logits
    log_denoms: dict[tuple[int, int], float] = {}

    def log_prob(t: int, u: int, v: int) -> float:
        key = (t, u)
        if key not in log_denoms:
            row = logits[t, u]
            m = float(row.max())
            log_denoms[key] = m + math.log(math.fsum(math.exp(float(x) - m)
                                                     for x in row))
        return float(logits[t, u, v]) - log_denoms[key]

    terms: list[float] = []
    stack: list[tuple[int, int, float]] = [(0, 0, 0.0)] if mask[0, 0] else []
    while stack:
        t, u, acc = stack.pop()
        if t == n_frames - 1 and u == n_tokens:
            terms.append(acc + log_prob(t, u, BLANK_ID))
            continue
        if t + 1 < n_frames and mask[t + 1, u]:
            stack.append((t + 1, u, acc + log_prob(t, u, BLANK_ID)))
        if u < n_tokens and mask[t, u + 1]:
            stack.append((t, u + 1, acc + log_prob(t, u, instance.targets[u])))
    if not terms:
        return math.inf
    top = max(terms)
    return -(top + math.log(math.fsum(math.exp(x - top) for x in terms)))


def verify_instance(instance: RnntInstance, band: AlignmentBand | None = None,
                    epsilon: float = 1e-5, enum_cap: int = 200_000,
                    enum_tol: float = 1e-9, fd_tol: float = 1e-5,
                    node_sum_tol: float = 1e-8) -> dict:
    """Self-check harness used by the CLI: enumeration, finite differences,
    and per-node gradient sums.  Returns a report dict with a ``passed`` flag."""
    if band is not None:
        result = rnnt_loss_restricted(instance, band, with_grad=True)
    else:
        result = rnnt_loss_full(instance, with_grad=True)

    n_paths = count_alignments(instance.n_frames, instance.n_tokens)
    enum_rel = None
    if n_paths <= enum_cap:
        oracle = enumerate_loss(instance, band)
        enum_rel = abs(result.loss - oracle) / max(abs(oracle), 1e-30)

    fd_max = grad_check(instance, band, epsilon=epsilon)
    node_sums = result.gradients.sum(axis=2)
    node_sum_max = float(np.abs(node_sums).max())

    passed = (enum_rel is None or enum_rel <= enum_tol) \
        and fd_max <= fd_tol and node_sum_max <= node_sum_tol
    return {
        "enum_paths": n_paths if n_paths <= enum_cap else None,
        "enum_rel_error": enum_rel,
        "fd_max_rel_error": fd_max,
        "node_sum_max_abs": node_sum_max,
        "passed": passed,
    }


def load_case(obj: dict) -> tuple[RnntInstance, AlignmentBand | None]:
    """Parse the JSON loss-case format:
    {T, U, V, logits: [T][U+1][V], targets: [ids], band?: {a, b_l, b_r}}."""
    if not isinstance(obj, dict):
        raise ValidationError("loss case must be a JSON object")
    unknown = set(obj) - {"T", "U", "V", "logits", "targets", "band"}
    if unknown:
        raise ValidationError(f"unknown loss-case keys {sorted(unknown)}")
    missing = [k for k in ("T", "U", "V", "logits", "targets") if k not in obj]
    if missing:
        raise ValidationError(f"loss case missing keys {missing}")
    n_frames, n_tokens, n_vocab = obj["T"], obj["U"], obj["V"]
    try:
        logits = np.asarray(obj["logits"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"logits are not a numeric tensor: {exc}") from exc
    if logits.shape != (n_frames, n_tokens + 1, n_vocab):
        raise ValidationError(
            f"logits shape {logits.shape} does not match "
            f"(T, U+1, V) = ({n_frames}, {n_tokens + 1}, {n_vocab})")
    instance = RnntInstance(logits=logits, targets=tuple(obj["targets"]))
    band_obj = obj.get("band")
    if band_obj is None:
        return instance, None
    if not isinstance(band_obj, dict) or "a" not in band_obj \
            or set(band_obj) - {"a", "b_l", "b_r"}:
        raise ValidationError("band must be an object with keys a, b_l, b_r")
    band = AlignmentBand(token_frames=tuple(band_obj["a"]),
                         left_buffer=int(band_obj.get("b_l", 15)),
                         right_buffer=int(band_obj.get("b_r", 15)))
    return instance, band


def case_to_obj(instance: RnntInstance, band: AlignmentBand | None = None) -> dict:
    obj = {
        "T": instance.n_frames,
        "U": instance.n_tokens,
        "V": instance.vocab_size,
        "logits": instance.logits.tolist(),
        "targets": list(instance.targets),
    }
    if band is not None:
        obj["band"] = {"a": list(band.token_frames),
                       "b_l": band.left_buffer, "b_r": band.right_buffer}
    return obj
