"""Utterance-level discriminative baselines: edit-distance WER, MWER, MMI.

Both losses treat the N-best list as the hypothesis space, with the reference
force-appended when missing, and every sequence rescored under the grid with
its exact CTC log-likelihood so the losses are differentiable functions of
the logits through the per-hypothesis occupancies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ctc import LogPosteriorGrid, ctc_forward_loss, ctc_occupancies
from .errors import EmptyReferenceError, InfeasibleLabelError
from .nbest import NBestList
from .numerics import NEG_INF, logsumexp
from .tokenizer import BLANK_ID, TokenizedUtterance


@dataclass(frozen=True)
class EditStats:
    """Levenshtein alignment counts against a reference of ref_len tokens."""

    substitutions: int
    insertions: int
    deletions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        return self.errors / self.ref_len


def levenshtein_wer(ref: Sequence, hyp: Sequence) -> EditStats:
    """Minimum-edit alignment with unit costs.

    Backtrace ties prefer substitution over insertion over deletion, which
    fixes the (S, I, D) split; the total S+I+D is the edit distance either way.
    """
    if len(ref) == 0:
        raise EmptyReferenceError("reference is empty; WER undefined")
    n_ref, n_hyp = len(ref), len(hyp)
    dist = np.zeros((n_ref + 1, n_hyp + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n_ref + 1)
    dist[0, :] = np.arange(n_hyp + 1)
    for i in range(1, n_ref + 1):
        for j in range(1, n_hyp + 1):
            sub = dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            ins = dist[i, j - 1] + 1
            dele = dist[i - 1, j] + 1
            dist[i, j] = min(sub, ins, dele)
    subs = ins = dels = 0
    i, j = n_ref, n_hyp
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif j > 0 and dist[i, j] == dist[i, j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return EditStats(int(subs), int(ins), int(dels), n_ref)


def _ctc_log_likelihood(grid: LogPosteriorGrid, pieces: tuple[int, ...]) -> float:
    """log P(pieces | grid); the empty sequence is the all-blank path."""
    if not pieces:
        return float(np.sum(grid.values[:, BLANK_ID]))
    try:
        return -ctc_forward_loss(grid, pieces)
    except InfeasibleLabelError:
        return NEG_INF


def _ctc_gamma(grid: LogPosteriorGrid, pieces: tuple[int, ...]) -> np.ndarray:
    if not pieces:
        gamma = np.zeros((grid.n_frames, grid.n_symbols))
        gamma[:, BLANK_ID] = 1.0
        return gamma
    return ctc_occupancies(grid, pieces)


def _augmented_pieces(ref: TokenizedUtterance, nbest: NBestList) -> list[tuple[int, ...]]:
    candidates = [h.pieces for h in nbest.hyps]
    if ref.pieces not in candidates:
        candidates.append(ref.pieces)
    return candidates


def mwer_from_scores(
    log_scores: np.ndarray, errors: np.ndarray
) -> tuple[float, np.ndarray]:
    """Expected word errors under softmax posteriors, and d(loss)/d(score).

    The gradient applies baseline subtraction: posterior_i * (E_i - Ebar).
    When all error counts coincide there is no signal and the gradient is
    exactly zero.
    """
    log_scores = np.asarray(log_scores, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    post = np.exp(log_scores - logsumexp(log_scores))
    loss = float(np.dot(post, errors))
    if np.min(errors) == np.max(errors):
        return loss, np.zeros_like(post)
    return loss, post * (errors - loss)


def mmi_from_scores(log_scores: np.ndarray, ref_index: int) -> tuple[float, np.ndarray]:
    """-log posterior of the reference among the list, and d(loss)/d(score)."""
    log_scores = np.asarray(log_scores, dtype=np.float64)
    if len(log_scores) == 1:
        return 0.0, np.zeros(1)
    loss = float(logsumexp(log_scores) - log_scores[ref_index])
    grad = np.exp(log_scores - logsumexp(log_scores))
    grad[ref_index] -= 1.0
    return loss, grad


def mwer_loss_grad(
    grid: LogPosteriorGrid,
    ref: TokenizedUtterance,
    nbest: NBestList,
    to_words: Callable[[tuple[int, ...]], tuple] | None = None,
) -> tuple[float, np.ndarray]:
    """Expected word-error loss and its gradient w.r.t. the logits.

    Error counts compare word sequences when `to_words` maps piece ids to
    words; without it, piece sequences are compared directly. Either way the
    counts are constants of the optimization. Fewer than two distinct
    sequences after reference augmentation carry no contrast: zero gradient.
    """
    candidates = _augmented_pieces(ref, nbest)
    scored = [
        (pieces, _ctc_log_likelihood(grid, pieces))
        for pieces in candidates
    ]
    scored = [(p, s) for p, s in scored if s > NEG_INF]
    if len(scored) < 2:
        loss = 0.0
        if scored:
            pieces = scored[0][0]
            hyp_tokens = to_words(pieces) if to_words else pieces
            ref_tokens = ref.words if to_words else ref.pieces
            loss = float(levenshtein_wer(ref_tokens, hyp_tokens).errors)
        return loss, np.zeros((grid.n_frames, grid.n_symbols))
    scores = np.array([s for _, s in scored])
    if to_words is not None:
        errors = [levenshtein_wer(ref.words, to_words(p)).errors for p, _ in scored]
    else:
        errors = [levenshtein_wer(ref.pieces, p).errors for p, _ in scored]
    loss, grad_scores = mwer_from_scores(scores, np.array(errors, dtype=np.float64))
    grad = np.zeros((grid.n_frames, grid.n_symbols))
    if np.any(grad_scores != 0.0):
        probs = np.exp(grid.values)
        for (pieces, _), g in zip(scored, grad_scores):
            if g != 0.0:
                grad += g * (_ctc_gamma(grid, pieces) - probs)
    return loss, grad


def mmi_loss_grad(
    grid: LogPosteriorGrid, ref: TokenizedUtterance, nbest: NBestList
) -> tuple[float, np.ndarray]:
    """Negative reference log-posterior over nbest ∪ {ref}, gradient in logits.

    Non-negative by construction since the reference is in the denominator;
    exactly zero loss and gradient when the list degenerates to the reference
    alone.
    """
    candidates = _augmented_pieces(ref, nbest)
    scored = []
    ref_index = None
    for pieces in candidates:
        score = _ctc_log_likelihood(grid, pieces)
        if pieces == ref.pieces:
            if score == NEG_INF:
                raise InfeasibleLabelError("reference infeasible for this grid")
            ref_index = len(scored)
            scored.append((pieces, score))
        elif score > NEG_INF:
            scored.append((pieces, score))
    assert ref_index is not None
    scores = np.array([s for _, s in scored])
    loss, grad_scores = mmi_from_scores(scores, ref_index)
    grad = np.zeros((grid.n_frames, grid.n_symbols))
    if np.any(grad_scores != 0.0):
        probs = np.exp(grid.values)
        for (pieces, _), g in zip(scored, grad_scores):
            if g != 0.0:
                grad += g * (_ctc_gamma(grid, pieces) - probs)
    return loss, grad
