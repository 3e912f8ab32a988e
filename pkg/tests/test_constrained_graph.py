"""Boundary-blank word graph scores and occupancies vs path enumeration."""

import math

import numpy as np
import pytest

from fdtlab.ctc import LogPosteriorGrid
from fdtlab.errors import EmptyLabelError, TooShortSegmentError
from fdtlab.numerics import NEG_INF, log_softmax
from fdtlab.wordgraph import (
    TransitionModel,
    blank_only_score,
    build_word_graph,
    constrained_forward_score,
    constrained_occupancies,
    forward_backward_consistency,
)

from oracles import enum_constrained


def random_grid(rng, n_frames, n_symbols):
    return LogPosteriorGrid(
        log_softmax(rng.normal(scale=2.0, size=(n_frames, n_symbols)), axis=1)
    )


def test_state_count_is_pieces_plus_two():
    for label in [(1,), (1, 2), (2, 2, 1), (1, 2, 3, 1)]:
        graph = build_word_graph(label, frames=8)
        assert graph.n_states == len(label) + 2
        assert tuple(graph.state_ids) == (0,) + label + (0,)


def test_transition_rows_hold_documented_weights():
    graph = build_word_graph((1,), frames=10)
    assert np.isclose(graph.trans[0, 0], math.log(0.1))
    assert np.isclose(graph.trans[0, 1], math.log(0.9))
    assert np.isclose(graph.start[0], math.log(0.1))
    assert np.isclose(graph.start[1], math.log(0.9))
    assert np.isclose(graph.trans[1, 1], math.log(0.5))
    assert np.isclose(graph.trans[1, 2], math.log(0.5))
    assert graph.trans[2, 2] == 0.0
    assert graph.trans[1, 0] == NEG_INF
    assert graph.trans[2, 1] == NEG_INF


def test_single_frame_horizon_is_clamped():
    tm = TransitionModel(1)
    assert tm.horizon == 2
    assert np.isclose(tm.log_blank_stay, math.log(0.5))
    assert np.isclose(tm.log_blank_advance, math.log(0.5))


def test_three_frame_two_piece_hand_enumeration():
    # label (a, b) over 3 frames; complete paths through [blank, a, b, blank]:
    #   a a b, a b b, a b blank, blank a b, each with its q product
    grid = random_grid(np.random.default_rng(7), 3, 3)
    p = np.exp(grid.values)
    a, b = 1, 2
    q_start_blank, q_start_piece = 1.0 / 3.0, 2.0 / 3.0
    paths = [
        q_start_piece * 0.5 * 0.5 * p[0, a] * p[1, a] * p[2, b],
        q_start_piece * 0.5 * 0.5 * p[0, a] * p[1, b] * p[2, b],
        q_start_piece * 0.5 * 0.5 * p[0, a] * p[1, b] * p[2, 0],
        q_start_blank * q_start_piece * 0.5 * p[0, 0] * p[1, a] * p[2, b],
    ]
    graph = build_word_graph((a, b), frames=3)
    got = constrained_forward_score(graph, grid)
    assert np.isclose(math.exp(got), math.fsum(paths), rtol=1e-12)


def test_score_and_occupancies_match_enumeration():
    for i in range(150):
        sub = np.random.default_rng([201, i])
        n_frames = int(sub.integers(1, 7))
        n_symbols = int(sub.integers(2, 5))
        u = int(sub.integers(1, min(n_frames, 3) + 1))
        label = tuple(int(x) for x in sub.integers(1, n_symbols, size=u))
        grid = random_grid(sub, n_frames, n_symbols)
        graph = build_word_graph(label, n_frames)
        want_logq, want_gamma = enum_constrained(grid.values, label)
        got_logq = constrained_forward_score(graph, grid)
        assert abs(math.exp(got_logq) - math.exp(want_logq)) <= 1e-10 * math.exp(
            want_logq
        )
        gamma = constrained_occupancies(graph, grid)
        assert np.allclose(gamma.sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(gamma, want_gamma, atol=1e-11)


def test_no_blank_between_pieces():
    # over 3 frames with label (a, b), no complete path may emit a blank
    # between the two pieces; occupancy of blank at the middle frame exists
    # only via paths that finished both pieces already or started late
    grid = LogPosteriorGrid(
        np.log(np.full((3, 3), 1.0 / 3.0)), check=True
    )
    gamma = constrained_occupancies(build_word_graph((1, 2), 3), grid)
    # frame 2 blank mass can only come from path a b blank reversed ordering,
    # which is impossible at frame 2 with both pieces pending, so the only
    # blank mass at frame 2 is zero
    assert gamma[1, 0] == 0.0


def test_forward_backward_consistency_is_flat():
    rng = np.random.default_rng(8)
    grid = random_grid(rng, 6, 4)
    graph = build_word_graph((2, 3), 6)
    per_frame = forward_backward_consistency(graph, grid)
    assert np.allclose(per_frame, per_frame[0], atol=1e-10)
    assert np.isclose(per_frame[0], constrained_forward_score(graph, grid))


def test_blank_only_score_hand_value():
    grid = random_grid(np.random.default_rng(9), 3, 3)
    want = float(np.sum(grid.values[:, 0])) + 3 * math.log(1.0 / 3.0)
    assert np.isclose(blank_only_score(grid), want, rtol=1e-14)


def test_ratio_equals_normalized_ratio_on_tiny_alphabet():
    # normalizing Q over all label sequences of length <= 2 cancels in the
    # score difference, so the unnormalized ratio is already the normalized one
    rng = np.random.default_rng(10)
    grid = random_grid(rng, 4, 3)
    labels = [(1,), (2,), (1, 2), (2, 1), (1, 1), (2, 2)]
    scores = {
        l: constrained_forward_score(build_word_graph(l, 4), grid) for l in labels
    }
    log_z = float(np.logaddexp.reduce(sorted(scores.values())))
    for la in labels:
        for lb in labels:
            raw = scores[la] - scores[lb]
            normalized = (scores[la] - log_z) - (scores[lb] - log_z)
            assert np.isclose(raw, normalized, atol=1e-12)


def test_build_word_graph_validation():
    with pytest.raises(EmptyLabelError):
        build_word_graph((), 4)
    with pytest.raises(TooShortSegmentError):
        build_word_graph((1, 2, 3), 2)
    with pytest.raises(ValueError):
        build_word_graph((0, 1), 4)
