"""CTC over a frame grid of log posteriors.

All dynamic programs here run in log space over the standard blank-interleaved
state graph: a label sequence of length U expands to 2U+1 states
[blank, l1, blank, l2, ..., blank], with self-loops, steps to the next state,
and skips over a blank when the two labels it separates differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLabelError, InfeasibleLabelError
from .numerics import NEG_INF, logsumexp
from .tokenizer import BLANK_ID


class LogPosteriorGrid:
    """T x (V+1) grid of per-frame log posteriors; column 0 is blank.

    Rows must be normalized log distributions (|logsumexp(row)| <= 1e-6).
    Pass check=False to hold perturbed rows, e.g. for finite differencing
    where entries are treated as free variables.
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray, *, check: bool = True) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 2:
            raise ValueError(f"grid must be T x (V+1) with T>=1, V>=1, got {values.shape}")
        if check:
            norms = logsumexp(values, axis=1)
            worst = float(np.max(np.abs(norms)))
            if not np.isfinite(worst) or worst > 1e-6:
                raise ValueError(f"grid rows not normalized (max |logsumexp| = {worst:.3g})")
        self.values = values

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_symbols(self) -> int:
        """Vocabulary size including blank (V+1)."""
        return self.values.shape[1]

    def slice_frames(self, start: int, stop: int) -> "LogPosteriorGrid":
        """Sub-grid over 1-based inclusive frame span [start, stop]."""
        if not (1 <= start <= stop <= self.n_frames):
            raise ValueError(f"frame span [{start}, {stop}] outside 1..{self.n_frames}")
        return LogPosteriorGrid(self.values[start - 1 : stop], check=False)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LogPosteriorGrid) and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class Alignment:
    """A frame-level label path and where each label is first emitted.

    tokens[t] is the id emitted at frame t+1 (blank or a label id);
    emission_frames[i] is the 1-based frame at which the Viterbi path enters
    the state of label position i, so collapse(tokens) == labels.
    """

    tokens: tuple[int, ...]
    emission_frames: tuple[int, ...]
    labels: tuple[int, ...] = field(repr=False, default=())

    def __post_init__(self) -> None:
        if self.labels and collapse(self.tokens) != tuple(self.labels):
            raise ValueError("alignment tokens do not collapse to the labels")
        if list(self.emission_frames) != sorted(set(self.emission_frames)):
            raise ValueError("emission frames must be strictly increasing")


def collapse(tokens) -> tuple[int, ...]:
    """Remove blanks and merge repeats not separated by a blank."""
    out: list[int] = []
    prev = BLANK_ID
    for tok in tokens:
        tok = int(tok)
        if tok != BLANK_ID and tok != prev:
            out.append(tok)
        prev = tok
    return tuple(out)


def _extended_states(labels: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Blank-interleaved state ids and the skip-allowed mask."""
    u = len(labels)
    ext = np.zeros(2 * u + 1, dtype=np.int64)
    ext[1::2] = labels
    skip_ok = np.zeros(2 * u + 1, dtype=bool)
    for s in range(2, 2 * u + 1):
        skip_ok[s] = ext[s] != BLANK_ID and ext[s] != ext[s - 2]
    return ext, skip_ok


def _check_labels(grid: LogPosteriorGrid, labels: tuple[int, ...]) -> tuple[int, ...]:
    labels = tuple(int(l) for l in labels)
    if not labels:
        raise EmptyLabelError("label sequence is empty")
    for l in labels:
        if l == BLANK_ID:
            raise ValueError("labels must not contain the blank id")
        if not 1 <= l < grid.n_symbols:
            raise ValueError(f"label id {l} outside vocabulary of size {grid.n_symbols - 1}")
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    if grid.n_frames < len(labels) + repeats:
        raise InfeasibleLabelError(
            f"{len(labels)} labels ({repeats} adjacent repeats) need at least "
            f"{len(labels) + repeats} frames, grid has {grid.n_frames}"
        )
    return labels


def _forward(lp: np.ndarray, ext: np.ndarray, skip_ok: np.ndarray) -> np.ndarray:
    n_frames = lp.shape[0]
    n_states = ext.shape[0]
    alpha = np.full((n_frames, n_states), NEG_INF)
    alpha[0, 0] = lp[0, ext[0]]
    if n_states > 1:
        alpha[0, 1] = lp[0, ext[1]]
    for t in range(1, n_frames):
        prev = alpha[t - 1]
        cand = np.logaddexp(prev, np.concatenate(([NEG_INF], prev[:-1])))
        skip = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))
        cand = np.where(skip_ok, np.logaddexp(cand, skip), cand)
        alpha[t] = cand + lp[t, ext]
    return alpha


def _backward(lp: np.ndarray, ext: np.ndarray, skip_ok: np.ndarray) -> np.ndarray:
    n_frames = lp.shape[0]
    n_states = ext.shape[0]
    beta = np.full((n_frames, n_states), NEG_INF)
    beta[n_frames - 1, n_states - 1] = 0.0
    if n_states > 1:
        beta[n_frames - 1, n_states - 2] = 0.0
    # skip_from[s]: a path at state s may jump to s+2 at the next frame
    skip_from = np.zeros(n_states, dtype=bool)
    skip_from[: n_states - 2] = skip_ok[2:]
    for t in range(n_frames - 2, -1, -1):
        nxt = beta[t + 1] + lp[t + 1, ext]
        cand = np.logaddexp(nxt, np.concatenate((nxt[1:], [NEG_INF])))
        skip = np.concatenate((nxt[2:], [NEG_INF, NEG_INF]))
        beta[t] = np.where(skip_from, np.logaddexp(cand, skip), cand)
    return beta


def ctc_forward_loss(grid: LogPosteriorGrid, labels) -> float:
    """Negative log of the summed probability of all paths collapsing to labels."""
    labels = _check_labels(grid, labels)
    ext, skip_ok = _extended_states(labels)
    alpha = _forward(grid.values, ext, skip_ok)
    total = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    if not np.isfinite(total):
        raise InfeasibleLabelError("no path with finite probability reaches the labels")
    return float(-total)


def ctc_occupancies(grid: LogPosteriorGrid, labels) -> np.ndarray:
    """Posterior occupancy gamma_t(j) of each vocabulary id per frame.

    Returns a T x (V+1) matrix; each row sums to 1 (total path posterior mass
    at that frame, with states sharing an id merged).
    """
    labels = _check_labels(grid, labels)
    ext, skip_ok = _extended_states(labels)
    lp = grid.values
    alpha = _forward(lp, ext, skip_ok)
    beta = _backward(lp, ext, skip_ok)
    log_total = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    if not np.isfinite(log_total):
        raise InfeasibleLabelError("no path with finite probability reaches the labels")
    state_post = np.exp(alpha + beta - log_total)
    gamma = np.zeros((grid.n_frames, grid.n_symbols))
    for s, idx in enumerate(ext):
        gamma[:, idx] += state_post[:, s]
    return gamma


def ctc_grad_logits(grid: LogPosteriorGrid, labels) -> np.ndarray:
    """Gradient of ctc_forward_loss w.r.t. the logits behind the grid.

    With rows produced by a log-softmax, d(loss)/d(logit_tj) = p_t(j) - gamma_t(j);
    rows therefore sum to 0.
    """
    gamma = ctc_occupancies(grid, labels)
    return np.exp(grid.values) - gamma


def viterbi_align(grid: LogPosteriorGrid, labels) -> Alignment:
    """Most probable label-constrained path, with deterministic tie-breaks.

    Score ties during backtrace prefer the predecessor with the lower state
    index, and the final state likewise, which selects the path whose reversed
    state sequence is lexicographically smallest among the argmax set.
    """
    labels = _check_labels(grid, labels)
    ext, skip_ok = _extended_states(labels)
    lp = grid.values
    n_frames = grid.n_frames
    n_states = ext.shape[0]

    delta = np.full((n_frames, n_states), NEG_INF)
    delta[0, 0] = lp[0, ext[0]]
    if n_states > 1:
        delta[0, 1] = lp[0, ext[1]]
    # back[t, s] in {0: from s-2, 1: from s-1, 2: stay}; lowest index wins ties
    back = np.zeros((n_frames, n_states), dtype=np.int8)
    for t in range(1, n_frames):
        prev = delta[t - 1]
        skip = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))
        skip = np.where(skip_ok, skip, NEG_INF)
        step = np.concatenate(([NEG_INF], prev[:-1]))
        stacked = np.stack((skip, step, prev))
        back[t] = np.argmax(stacked, axis=0)
        delta[t] = np.max(stacked, axis=0) + lp[t, ext]

    if n_states > 1 and delta[-1, -2] >= delta[-1, -1]:
        state = n_states - 2
    else:
        state = n_states - 1
    if not np.isfinite(delta[-1, state]):
        raise InfeasibleLabelError("no feasible Viterbi path")

    states = np.empty(n_frames, dtype=np.int64)
    states[-1] = state
    for t in range(n_frames - 1, 0, -1):
        state = state - (2 - int(back[t, state]))
        states[t - 1] = state

    tokens = tuple(int(ext[s]) for s in states)
    emission = []
    for i in range(len(labels)):
        hits = np.nonzero(states == 2 * i + 1)[0]
        emission.append(int(hits[0]) + 1)
    return Alignment(tokens, tuple(emission), labels)


def viterbi_path_logprob(grid: LogPosteriorGrid, alignment: Alignment) -> float:
    """Log probability of one concrete alignment path under the grid."""
    rows = np.arange(grid.n_frames)
    return float(np.sum(grid.values[rows, np.asarray(alignment.tokens)]))
