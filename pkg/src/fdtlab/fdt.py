"""Focused discriminative training: word segmentation, error localization,
and the segment-level contrastive loss.

The reference Viterbi alignment cuts the utterance into word segments whose
frame spans share boundary frames: segment k runs from the emission frame of
the previous word's last piece (frame 1 for the first word) to the emission
frame of word k's own last piece, inclusive, in 1-based frames. A hypothesis
flags segment k when its alignment, collapsed over those frames, differs from
the reference's. Each flagged segment contributes
log Q(err | span) - log Q(ref | span) under the constrained word graph, so
minimizing pulls posterior mass from the wrongly recognized pieces to the
reference pieces inside the span and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctc import Alignment, LogPosteriorGrid, collapse, viterbi_align
from .errors import EmptyLabelError, InfeasibleLabelError, TooShortSegmentError
from .nbest import Hypothesis, NBestList
from .tokenizer import BLANK_ID, TokenizedUtterance
from .wordgraph import (
    blank_only_score,
    build_word_graph,
    constrained_forward_score,
    constrained_occupancies,
)


@dataclass(frozen=True)
class WordSegmentation:
    """Per-word frame spans induced by the reference alignment.

    frame_spans[k] = (t_k, t_{k+1}) is 1-based inclusive; consecutive spans
    share their boundary frame and every span has at least as many frames as
    the word has pieces.
    """

    words: tuple[str, ...]
    frame_spans: tuple[tuple[int, int], ...]
    alignment: Alignment

    def __post_init__(self) -> None:
        if len(self.words) != len(self.frame_spans):
            raise ValueError("one frame span per word required")
        prev_end = 1
        for start, end in self.frame_spans:
            if start != prev_end or end < start:
                raise ValueError(f"bad frame span ({start}, {end})")
            prev_end = end


@dataclass(frozen=True)
class ErrorSegment:
    """One flagged word span with its competing piece sets.

    err_pieces is the collapsed hypothesis slice minus (as a multiset) the
    pieces of the collapsed reference slice, hypothesis order preserved; empty
    err_pieces means the hypothesis simply dropped the word (deletion), and the
    competitor becomes the all-blank path.
    """

    word_index: int
    frame_span: tuple[int, int]
    ref_pieces: tuple[int, ...]
    err_pieces: tuple[int, ...]
    hyp_weight: float = 1.0


@dataclass(frozen=True)
class FdtResult:
    """Posterior-weighted utterance loss and its log-posterior gradient."""

    loss: float
    grad_logp: np.ndarray  # T x (V+1), d(loss)/d(log posterior entry)
    segments_flagged: int
    utterance_skipped: bool


def segment_by_words(grid: LogPosteriorGrid, ref: TokenizedUtterance) -> WordSegmentation:
    """Cut the grid into word spans from the reference Viterbi alignment."""
    alignment = viterbi_align(grid, ref.pieces)
    spans = []
    t_prev = 1
    for k in range(len(ref.words)):
        _, stop = ref.word_spans[k]
        t_end = alignment.emission_frames[stop - 1]
        spans.append((t_prev, t_end))
        t_prev = t_end
    return WordSegmentation(ref.words, tuple(spans), alignment)


def _multiset_difference(
    hyp_slice: tuple[int, ...], ref_slice: tuple[int, ...]
) -> tuple[int, ...]:
    remaining: dict[int, int] = {}
    for piece in ref_slice:
        remaining[piece] = remaining.get(piece, 0) + 1
    out = []
    for piece in hyp_slice:
        if remaining.get(piece, 0) > 0:
            remaining[piece] -= 1
        else:
            out.append(piece)
    return tuple(out)


def detect_error_segments(
    grid: LogPosteriorGrid,
    ref: TokenizedUtterance,
    hyp: Hypothesis,
    segmentation: WordSegmentation,
    hyp_weight: float = 1.0,
) -> list[ErrorSegment]:
    """Flag word spans where the hypothesis alignment disagrees.

    A hypothesis that is empty or infeasible for the grid length is treated as
    the all-blank alignment, so every word span is flagged as a deletion.
    """
    try:
        hyp_tokens = np.asarray(viterbi_align(grid, hyp.pieces).tokens)
    except (EmptyLabelError, InfeasibleLabelError):
        hyp_tokens = np.full(grid.n_frames, BLANK_ID, dtype=np.int64)
    ref_tokens = np.asarray(segmentation.alignment.tokens)

    segments = []
    for k, (start, end) in enumerate(segmentation.frame_spans):
        ref_slice = collapse(ref_tokens[start - 1 : end])
        hyp_slice = collapse(hyp_tokens[start - 1 : end])
        if ref_slice == hyp_slice:
            continue
        segments.append(
            ErrorSegment(
                word_index=k,
                frame_span=(start, end),
                ref_pieces=ref.word_pieces(k),
                err_pieces=_multiset_difference(hyp_slice, ref_slice),
                hyp_weight=hyp_weight,
            )
        )
    return segments


def segment_contrastive_loss_grad(
    grid: LogPosteriorGrid, segment: ErrorSegment
) -> tuple[float, np.ndarray]:
    """Loss log Q(err) - log Q(ref) over the span, and its gradient.

    Returns (loss, grad) with grad of shape (span frames) x (V+1) holding
    d(loss)/d(log posterior) = gamma_err - gamma_ref: non-positive at the
    reference pieces, non-negative at the error pieces, their occupancy
    difference at blank, and exactly zero elsewhere.
    """
    if not segment.ref_pieces:
        raise EmptyLabelError("segment has no reference pieces")
    start, end = segment.frame_span
    span = grid.slice_frames(start, end)
    if span.n_frames < len(segment.ref_pieces):
        raise TooShortSegmentError(
            f"span [{start}, {end}] too short for {len(segment.ref_pieces)} pieces"
        )
    ref_graph = build_word_graph(segment.ref_pieces, span.n_frames)
    log_q_ref = constrained_forward_score(ref_graph, span)
    gamma_ref = constrained_occupancies(ref_graph, span)
    if segment.err_pieces:
        err_graph = build_word_graph(segment.err_pieces, span.n_frames)
        log_q_err = constrained_forward_score(err_graph, span)
        gamma_err = constrained_occupancies(err_graph, span)
    else:
        log_q_err = blank_only_score(span)
        gamma_err = np.zeros_like(gamma_ref)
        gamma_err[:, BLANK_ID] = 1.0
    return log_q_err - log_q_ref, gamma_err - gamma_ref


def fdt_utterance_loss_grad(
    grid: LogPosteriorGrid, ref: TokenizedUtterance, nbest: NBestList
) -> FdtResult:
    """Posterior-weighted sum of segment losses over the N-best list.

    The reference is not force-inserted; hypotheses equal to the reference
    flag nothing. When no hypothesis flags any segment the utterance is
    skipped: loss 0, zero gradient.
    """
    segmentation = segment_by_words(grid, ref)
    loss = 0.0
    grad = np.zeros((grid.n_frames, grid.n_symbols))
    flagged = 0
    for hyp, weight in zip(nbest.hyps, nbest.posteriors):
        for segment in detect_error_segments(grid, ref, hyp, segmentation, weight):
            seg_loss, seg_grad = segment_contrastive_loss_grad(grid, segment)
            start, end = segment.frame_span
            loss += weight * seg_loss
            grad[start - 1 : end] += weight * seg_grad
            flagged += 1
    return FdtResult(loss, grad, flagged, flagged == 0)


def logp_grad_to_logits(grad_logp: np.ndarray, grid: LogPosteriorGrid) -> np.ndarray:
    """Chain a log-posterior gradient through the log-softmax to logits."""
    row_sums = np.sum(grad_logp, axis=1, keepdims=True)
    return grad_logp - np.exp(grid.values) * row_sums
