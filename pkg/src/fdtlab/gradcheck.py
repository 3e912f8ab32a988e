"""Finite-difference verification suites for every analytic gradient.

Each suite builds seeded random instances, compares the analytic gradient
against central differences, and reports the worst relative error. The CLI's
grad-check subcommand runs all of them; the test suite reuses the same code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .baselines import mmi_loss_grad, mwer_loss_grad
from .ctc import LogPosteriorGrid, ctc_forward_loss, ctc_grad_logits
from .encoder import encoder_backward, encoder_forward, init_encoder
from .fdt import ErrorSegment, segment_contrastive_loss_grad
from .nbest import nbest_posteriors, prefix_beam_search
from .numerics import log_softmax
from .tokenizer import TokenizedUtterance


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1e-12, abs(a) + abs(b))


def central_difference(fn: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    """Dense central-difference gradient of a scalar function."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = grad.reshape(-1)
    base = x.astype(np.float64).copy()
    for i in range(base.size):
        bump = np.zeros(base.size)
        bump[i] = step
        hi = fn((base + bump.reshape(x.shape)))
        lo = fn((base - bump.reshape(x.shape)))
        flat[i] = (hi - lo) / (2.0 * step)
    return grad


def compare_grads(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Worst elementwise relative error, ignoring entries that are noise on
    both sides (central differences bottom out near eps/step)."""
    worst = 0.0
    for a, b in zip(analytic.reshape(-1), numeric.reshape(-1)):
        if abs(a) < floor and abs(b) < floor:
            continue
        worst = max(worst, rel_err(float(a), float(b)))
    return worst


def random_grid(rng: np.random.Generator, n_frames: int, n_symbols: int) -> LogPosteriorGrid:
    return LogPosteriorGrid(log_softmax(rng.normal(size=(n_frames, n_symbols)), axis=1))


def _random_labels(rng: np.random.Generator, n_symbols: int, max_len: int) -> tuple[int, ...]:
    length = int(rng.integers(1, max_len + 1))
    return tuple(int(rng.integers(1, n_symbols)) for _ in range(length))


def check_ctc_grad(seed: int = 0, instances: int = 20, step: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng([seed, 1])
    worst = 0.0
    done = 0
    while done < instances:
        n_frames = int(rng.integers(2, 7))
        n_symbols = int(rng.integers(2, 5))
        labels = _random_labels(rng, n_symbols, 3)
        repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
        if n_frames < len(labels) + repeats:
            continue
        logits = rng.normal(size=(n_frames, n_symbols))

        def loss_fn(x: np.ndarray) -> float:
            return ctc_forward_loss(LogPosteriorGrid(log_softmax(x, axis=1)), labels)

        grid = LogPosteriorGrid(log_softmax(logits, axis=1))
        analytic = ctc_grad_logits(grid, labels)
        numeric = central_difference(loss_fn, logits, step)
        worst = max(worst, compare_grads(analytic, numeric))
        done += 1
    return CheckResult("ctc-grad-logits", worst, 1e-4)


def random_flagged_segment(
    rng: np.random.Generator, n_symbols: int = 6
) -> tuple[LogPosteriorGrid, ErrorSegment]:
    """A grid plus a flagged segment with disjoint ref/err piece sets."""
    span_len = int(rng.integers(1, 7))
    pad_before = int(rng.integers(0, 3))
    pad_after = int(rng.integers(0, 3))
    n_frames = pad_before + span_len + pad_after
    ids = list(rng.permutation(np.arange(1, n_symbols)))
    u_ref = int(rng.integers(1, min(3, span_len) + 1))
    u_err = int(rng.integers(0, min(3, span_len, len(ids) - u_ref) + 1))
    ref_pieces = tuple(int(i) for i in ids[:u_ref])
    err_pieces = tuple(int(i) for i in ids[u_ref : u_ref + u_err])
    grid = random_grid(rng, n_frames, n_symbols)
    segment = ErrorSegment(
        word_index=0,
        frame_span=(pad_before + 1, pad_before + span_len),
        ref_pieces=ref_pieces,
        err_pieces=err_pieces,
    )
    return grid, segment


def check_segment_grad(seed: int = 0, instances: int = 100, step: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng([seed, 2])
    worst = 0.0
    for _ in range(instances):
        grid, segment = random_flagged_segment(rng)
        start, end = segment.frame_span
        _, analytic = segment_contrastive_loss_grad(grid, segment)

        def loss_fn(rows: np.ndarray) -> float:
            values = grid.values.copy()
            values[start - 1 : end] = rows
            loss, _ = segment_contrastive_loss_grad(
                LogPosteriorGrid(values, check=False), segment
            )
            return loss

        numeric = central_difference(loss_fn, grid.values[start - 1 : end].copy(), step)
        worst = max(worst, compare_grads(analytic, numeric))
    return CheckResult("segment-contrastive-grad", worst, 1e-4)


def _random_nbest_setup(rng: np.random.Generator):
    n_frames = int(rng.integers(3, 7))
    n_symbols = int(rng.integers(3, 5))
    logits = rng.normal(size=(n_frames, n_symbols))
    grid = LogPosteriorGrid(log_softmax(logits, axis=1))
    hyps = prefix_beam_search(grid, beam=8, n=4)
    nbest = nbest_posteriors(hyps)
    ref_pieces = _random_labels(rng, n_symbols, 2)
    ref = TokenizedUtterance(("w",) * len(ref_pieces), ref_pieces, tuple((i, i + 1) for i in range(len(ref_pieces))))
    return logits, grid, ref, nbest


def check_mwer_grad(seed: int = 0, instances: int = 20, step: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng([seed, 3])
    worst = 0.0
    for _ in range(instances):
        logits, grid, ref, nbest = _random_nbest_setup(rng)

        def loss_fn(x: np.ndarray) -> float:
            g = LogPosteriorGrid(log_softmax(x, axis=1))
            return mwer_loss_grad(g, ref, nbest)[0]

        _, analytic = mwer_loss_grad(grid, ref, nbest)
        numeric = central_difference(loss_fn, logits, step)
        worst = max(worst, compare_grads(analytic, numeric))
    return CheckResult("mwer-grad-logits", worst, 1e-3)


def check_mmi_grad(seed: int = 0, instances: int = 20, step: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng([seed, 4])
    worst = 0.0
    for _ in range(instances):
        logits, grid, ref, nbest = _random_nbest_setup(rng)

        def loss_fn(x: np.ndarray) -> float:
            g = LogPosteriorGrid(log_softmax(x, axis=1))
            return mmi_loss_grad(g, ref, nbest)[0]

        _, analytic = mmi_loss_grad(grid, ref, nbest)
        numeric = central_difference(loss_fn, logits, step)
        worst = max(worst, compare_grads(analytic, numeric))
    return CheckResult("mmi-grad-logits", worst, 1e-3)


def check_encoder_backward(seed: int = 0, instances: int = 5, step: float = 3e-4) -> CheckResult:
    # The step is coarse on purpose: parameters are float32, so the bump is
    # rounded to roughly 1e-8 absolute and a tiny step would be mostly noise.
    rng = np.random.default_rng([seed, 5])
    worst = 0.0
    for _ in range(instances):
        n_frames = int(rng.integers(3, 8))
        dim, hidden, n_symbols = 4, 6, 3
        params = init_encoder(rng, dim, n_symbols, context=3, hidden=hidden)
        features = rng.normal(size=(n_frames, dim))
        labels = _random_labels(rng, n_symbols, 2)
        if n_frames < 2 * len(labels):
            continue

        def loss_with(params_vec: np.ndarray, name: str, shape) -> float:
            import copy

            p2 = copy.deepcopy(params)
            getattr(p2, name)[...] = params_vec.reshape(shape).astype(np.float32)
            return ctc_forward_loss(encoder_forward(p2, features), labels)

        grid = encoder_forward(params, features)
        grads = encoder_backward(params, features, ctc_grad_logits(grid, labels))
        for name in ("w_in", "b_in", "w_out", "b_out"):
            arr = getattr(params, name).astype(np.float64)
            numeric = central_difference(
                lambda v, _n=name, _s=arr.shape: loss_with(v, _n, _s), arr, step
            )
            worst = max(worst, compare_grads(getattr(grads, name), numeric))
    return CheckResult("encoder-backward", worst, 2e-3)


ALL_CHECKS = (
    check_ctc_grad,
    check_segment_grad,
    check_mwer_grad,
    check_mmi_grad,
    check_encoder_backward,
)


def run_all_checks(seed: int = 0) -> list[CheckResult]:
    return [check(seed) for check in ALL_CHECKS]
