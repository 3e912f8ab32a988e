"""Encoder tests: window layout, strict causality, analytic gradients."""

import numpy as np
import pytest

from fdtlab.ctc import ctc_forward_loss, ctc_grad_logits
from fdtlab.encoder import (
    EncoderParams,
    encoder_backward,
    encoder_forward,
    init_encoder,
    stack_windows,
)
from fdtlab.gradcheck import central_difference, check_encoder_backward, compare_grads
from fdtlab.numerics import logsumexp


def test_stack_windows_layout():
    feats = np.arange(8, dtype=np.float64).reshape(4, 2)
    out = stack_windows(feats, context=3)
    assert out.shape == (4, 6)
    # Row t holds frames t-2, t-1, t left to right, zero-padded at the start.
    np.testing.assert_array_equal(out[0], [0, 0, 0, 0, 0, 1])
    np.testing.assert_array_equal(out[1], [0, 0, 0, 1, 2, 3])
    np.testing.assert_array_equal(out[2], [0, 1, 2, 3, 4, 5])
    np.testing.assert_array_equal(out[3], [2, 3, 4, 5, 6, 7])


def test_stack_windows_context_one_is_identity():
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(5, 3))
    np.testing.assert_array_equal(stack_windows(feats, context=1), feats)


def test_init_encoder_shapes_and_dtypes():
    rng = np.random.default_rng(7)
    params = init_encoder(rng, feature_dim=4, n_symbols=5, context=3, hidden=6)
    assert params.w_in.shape == (12, 6)
    assert params.b_in.shape == (1, 6)
    assert params.w_out.shape == (6, 5)
    assert params.b_out.shape == (1, 5)
    for arr in params.as_dict().values():
        assert arr.dtype == np.float32
    assert np.all(params.b_in == 0.0) and np.all(params.b_out == 0.0)
    assert params.hidden == 6
    assert params.n_symbols == 5
    assert params.context(4) == 3


def test_init_encoder_deterministic():
    a = init_encoder(np.random.default_rng([3, 42]), 4, 5, context=2, hidden=8)
    b = init_encoder(np.random.default_rng([3, 42]), 4, 5, context=2, hidden=8)
    for k in a.as_dict():
        np.testing.assert_array_equal(a.as_dict()[k], b.as_dict()[k])


def test_forward_rows_normalized():
    rng = np.random.default_rng(11)
    params = init_encoder(rng, 3, 4, context=2, hidden=5)
    grid = encoder_forward(params, rng.normal(size=(9, 3)))
    assert grid.n_frames == 9 and grid.n_symbols == 4
    np.testing.assert_allclose(logsumexp(grid.values, axis=1), 0.0, atol=1e-12)


def test_strict_causality():
    """Perturbing frame t must leave outputs at frames before t bitwise alone."""
    rng = np.random.default_rng(23)
    params = init_encoder(rng, 4, 5, context=3, hidden=6)
    feats = rng.normal(size=(10, 4))
    base = encoder_forward(params, feats).values
    for t0 in (0, 4, 9):
        bumped = feats.copy()
        bumped[t0] += 1.0
        out = encoder_forward(params, bumped).values
        np.testing.assert_array_equal(out[:t0], base[:t0])
        assert not np.array_equal(out[t0], base[t0])
        # Influence ends once the window slides past the perturbed frame.
        np.testing.assert_array_equal(out[t0 + 3 :], base[t0 + 3 :])


def test_backward_matches_finite_differences_float64():
    """With float64 parameter copies the analytic gradient is tight."""
    rng = np.random.default_rng([17, 5])
    for _ in range(6):
        dim, hidden, n_symbols, context = 3, 4, 3, 2
        n_frames = int(rng.integers(4, 8))
        p32 = init_encoder(rng, dim, n_symbols, context=context, hidden=hidden)
        params = EncoderParams.from_dict(
            {k: a.astype(np.float64) for k, a in p32.as_dict().items()}
        )
        feats = rng.normal(size=(n_frames, dim))
        labels = (1, 2)

        grid = encoder_forward(params, feats)
        grads = encoder_backward(params, feats, ctc_grad_logits(grid, labels))

        def loss_with(vec, name, shape):
            mats = {k: a.copy() for k, a in params.as_dict().items()}
            mats[name] = vec.reshape(shape)
            p2 = EncoderParams.from_dict(mats)
            return ctc_forward_loss(encoder_forward(p2, feats), labels)

        for name, arr in params.as_dict().items():
            numeric = central_difference(
                lambda v, _n=name, _s=arr.shape: loss_with(v, _n, _s), arr, step=1e-6
            )
            assert compare_grads(getattr(grads, name), numeric) < 1e-6


def test_backward_suite_float32():
    result = check_encoder_backward(seed=0)
    assert result.passed, f"{result.name}: {result.max_rel_err} > {result.tolerance}"


def test_forward_deterministic():
    rng = np.random.default_rng(31)
    params = init_encoder(rng, 3, 4, context=2, hidden=5)
    feats = rng.normal(size=(6, 3))
    a = encoder_forward(params, feats).values
    b = encoder_forward(params, feats).values
    np.testing.assert_array_equal(a, b)


def test_params_round_trip_dict():
    rng = np.random.default_rng(41)
    params = init_encoder(rng, 2, 3, context=2, hidden=4)
    again = EncoderParams.from_dict(params.as_dict())
    for k in params.as_dict():
        np.testing.assert_array_equal(params.as_dict()[k], again.as_dict()[k])


@pytest.mark.parametrize("bad_frames", [0])
def test_empty_features_rejected(bad_frames):
    rng = np.random.default_rng(5)
    params = init_encoder(rng, 3, 4, context=2, hidden=5)
    feats = np.zeros((bad_frames, 3))
    with pytest.raises(Exception):
        encoder_forward(params, feats)
