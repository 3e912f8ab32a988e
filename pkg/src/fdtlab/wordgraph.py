"""Label-constrained word graph with a clique-product transition model.

A word of u pieces becomes a left-to-right chain of u+2 states:
[initial blank, piece_1, ..., piece_u, final blank]. Blanks are allowed only
at the edges; pieces connect directly, so no path puts a blank between two
pieces of the word. Each frame contributes one emission factor and one
transition factor q, and the forward pass sums the unnormalized products Q
over all complete paths (those covering every piece). Q's normalizer is never
computed: the training losses only ever use ratios of Q values over the same
frames, where it cancels.

Transition rule: from a blank state, staying costs 1/T and advancing costs
(T-1)/T; a piece state splits probability equally over its allowed arcs; the
final blank, having nowhere to go, keeps probability 1 on its self-loop. The
virtual start mirrors the blank rule (1/T into the initial blank, (T-1)/T
diagonally into the first piece). T is clamped below at 2 so single-frame
segments keep finite weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ctc import LogPosteriorGrid
from .errors import EmptyLabelError, TooShortSegmentError
from .numerics import NEG_INF, logsumexp
from .tokenizer import BLANK_ID


@dataclass(frozen=True)
class TransitionModel:
    """Per-frame transition weights for a segment of `frames` frames."""

    frames: int

    def __post_init__(self) -> None:
        if self.frames < 1:
            raise ValueError("frames must be >= 1")

    @property
    def horizon(self) -> int:
        """Effective T in the blank rule; clamped so probabilities stay in (0, 1)."""
        return max(self.frames, 2)

    @property
    def log_blank_stay(self) -> float:
        return -math.log(self.horizon)

    @property
    def log_blank_advance(self) -> float:
        return math.log(self.horizon - 1) - math.log(self.horizon)


@dataclass(frozen=True)
class ConstrainedWordGraph:
    """States, arc weights, and acceptance set for one word over T frames."""

    label: tuple[int, ...]
    frames: int
    state_ids: np.ndarray  # (u+2,) vocabulary id per state
    start: np.ndarray  # (u+2,) log q from the virtual start
    trans: np.ndarray  # (u+2, u+2) log q, row = source state
    accepting: np.ndarray  # (u+2,) bool

    @property
    def n_states(self) -> int:
        return len(self.state_ids)


def build_word_graph(label, frames: int) -> ConstrainedWordGraph:
    """Construct the u+2 state graph for `label` over `frames` frames."""
    label = tuple(int(l) for l in label)
    if not label:
        raise EmptyLabelError("cannot build a word graph for an empty label")
    if any(l == BLANK_ID for l in label):
        raise ValueError("word labels must not contain the blank id")
    if frames < len(label):
        raise TooShortSegmentError(
            f"{len(label)} pieces cannot fit in {frames} frame(s)"
        )
    u = len(label)
    tm = TransitionModel(frames)
    n = u + 2
    state_ids = np.zeros(n, dtype=np.int64)
    state_ids[1 : u + 1] = label

    trans = np.full((n, n), NEG_INF)
    trans[0, 0] = tm.log_blank_stay
    trans[0, 1] = tm.log_blank_advance
    half = -math.log(2.0)
    for i in range(1, u + 1):
        trans[i, i] = half
        trans[i, i + 1] = half
    trans[n - 1, n - 1] = 0.0  # final blank keeps all mass on its self-loop

    start = np.full(n, NEG_INF)
    start[0] = tm.log_blank_stay
    start[1] = tm.log_blank_advance

    accepting = np.zeros(n, dtype=bool)
    accepting[u] = True
    accepting[u + 1] = True
    return ConstrainedWordGraph(label, frames, state_ids, start, trans, accepting)


def _emissions(graph: ConstrainedWordGraph, grid: LogPosteriorGrid) -> np.ndarray:
    if grid.n_frames != graph.frames:
        raise ValueError(
            f"grid has {grid.n_frames} frames but the graph was built for {graph.frames}"
        )
    if np.max(graph.state_ids) >= grid.n_symbols:
        raise ValueError("graph labels outside the grid vocabulary")
    return grid.values[:, graph.state_ids]


def _alpha(graph: ConstrainedWordGraph, emis: np.ndarray) -> np.ndarray:
    alpha = np.empty_like(emis)
    alpha[0] = graph.start + emis[0]
    for t in range(1, emis.shape[0]):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + graph.trans, axis=0) + emis[t]
    return alpha


def _beta(graph: ConstrainedWordGraph, emis: np.ndarray) -> np.ndarray:
    beta = np.full_like(emis, NEG_INF)
    beta[-1][graph.accepting] = 0.0
    for t in range(emis.shape[0] - 2, -1, -1):
        beta[t] = logsumexp(graph.trans + (emis[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def constrained_forward_score(graph: ConstrainedWordGraph, grid: LogPosteriorGrid) -> float:
    """log Q: unnormalized clique-product mass of all complete paths."""
    emis = _emissions(graph, grid)
    alpha = _alpha(graph, emis)
    return float(logsumexp(alpha[-1][graph.accepting]))


def constrained_occupancies(
    graph: ConstrainedWordGraph, grid: LogPosteriorGrid
) -> np.ndarray:
    """Occupancy gamma_t(j) over vocabulary ids under the constrained graph.

    Returns T x (V+1); rows sum to 1. States sharing an id (the two blanks,
    or repeated pieces) are merged.
    """
    emis = _emissions(graph, grid)
    alpha = _alpha(graph, emis)
    beta = _beta(graph, emis)
    log_q = logsumexp(alpha[-1][graph.accepting])
    state_post = np.exp(alpha + beta - log_q)
    gamma = np.zeros((grid.n_frames, grid.n_symbols))
    for s, idx in enumerate(graph.state_ids):
        gamma[:, idx] += state_post[:, s]
    return gamma


def forward_backward_consistency(
    graph: ConstrainedWordGraph, grid: LogPosteriorGrid
) -> np.ndarray:
    """log Q recomputed from alpha_t + beta_t at every frame (diagnostic)."""
    emis = _emissions(graph, grid)
    alpha = _alpha(graph, emis)
    beta = _beta(graph, emis)
    return np.array([logsumexp(alpha[t] + beta[t]) for t in range(emis.shape[0])])


def blank_only_score(grid: LogPosteriorGrid) -> float:
    """log Q of the all-blank path (competitor when the error set is empty)."""
    tm = TransitionModel(grid.n_frames)
    return float(np.sum(grid.values[:, BLANK_ID]) + grid.n_frames * tm.log_blank_stay)
