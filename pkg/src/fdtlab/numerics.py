"""Small log-space numerical helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np

NEG_INF = -math.inf


def logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """Stable log(sum(exp(a))) along `axis` (all -inf inputs give -inf)."""
    a = np.asarray(a, dtype=np.float64)
    a_max = np.max(a, axis=axis, keepdims=True) if a.size else np.float64(NEG_INF)
    a_max = np.where(np.isfinite(a_max), a_max, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - a_max), axis=axis, keepdims=True)) + a_max
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    x_max = np.max(x, axis=axis, keepdims=True)
    shifted = x - x_max
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def lae(a: float, b: float) -> float:
    """Scalar log-add-exp; faster than the numpy ufunc on python floats."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def row_entropies(logp: np.ndarray) -> np.ndarray:
    """Per-row entropy -sum(p * log p) of a matrix of log-probability rows."""
    p = np.exp(logp)
    terms = np.where(p > 0.0, p * logp, 0.0)
    return -np.sum(terms, axis=-1)
