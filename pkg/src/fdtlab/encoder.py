"""Strictly causal toy encoder: windowed MLP over left context only.

Frame t sees features t-context+1 .. t (zero-padded at the start), one tanh
hidden layer, and a log-softmax output head. Parameters live in float32 so
checkpoints round-trip exactly; the math runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctc import LogPosteriorGrid
from .numerics import log_softmax


@dataclass
class EncoderParams:
    w_in: np.ndarray  # (context * dim, hidden) float32
    b_in: np.ndarray  # (1, hidden)
    w_out: np.ndarray  # (hidden, n_symbols)
    b_out: np.ndarray  # (1, n_symbols)

    @property
    def hidden(self) -> int:
        return self.w_in.shape[1]

    @property
    def n_symbols(self) -> int:
        return self.w_out.shape[1]

    def context(self, feature_dim: int) -> int:
        return self.w_in.shape[0] // feature_dim

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"w_in": self.w_in, "b_in": self.b_in, "w_out": self.w_out, "b_out": self.b_out}

    @staticmethod
    def from_dict(mats: dict[str, np.ndarray]) -> "EncoderParams":
        return EncoderParams(mats["w_in"], mats["b_in"], mats["w_out"], mats["b_out"])


@dataclass
class EncoderGrads:
    w_in: np.ndarray
    b_in: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"w_in": self.w_in, "b_in": self.b_in, "w_out": self.w_out, "b_out": self.b_out}


def init_encoder(
    rng: np.random.Generator, feature_dim: int, n_symbols: int, context: int, hidden: int
) -> EncoderParams:
    fan_in = context * feature_dim
    w_in = (rng.normal(size=(fan_in, hidden)) / np.sqrt(fan_in)).astype(np.float32)
    w_out = (rng.normal(size=(hidden, n_symbols)) / np.sqrt(hidden)).astype(np.float32)
    return EncoderParams(
        w_in=w_in,
        b_in=np.zeros((1, hidden), dtype=np.float32),
        w_out=w_out,
        b_out=np.zeros((1, n_symbols), dtype=np.float32),
    )


def stack_windows(features: np.ndarray, context: int) -> np.ndarray:
    """(T, d) features -> (T, context*d) causal windows, zero-padded on the left."""
    feats = np.asarray(features, dtype=np.float64)
    n_frames, dim = feats.shape
    padded = np.concatenate([np.zeros((context - 1, dim)), feats], axis=0)
    out = np.empty((n_frames, context * dim))
    for offset in range(context):
        out[:, offset * dim : (offset + 1) * dim] = padded[offset : offset + n_frames]
    return out


def _forward_parts(params: EncoderParams, windows: np.ndarray):
    pre = windows @ params.w_in.astype(np.float64) + params.b_in.astype(np.float64)
    hidden = np.tanh(pre)
    logits = hidden @ params.w_out.astype(np.float64) + params.b_out.astype(np.float64)
    return hidden, logits


def encoder_forward(params: EncoderParams, features: np.ndarray) -> LogPosteriorGrid:
    """Log-posterior grid for one utterance's features."""
    context = params.context(np.asarray(features).shape[1])
    windows = stack_windows(features, context)
    _, logits = _forward_parts(params, windows)
    return LogPosteriorGrid(log_softmax(logits, axis=1), check=False)


def encoder_backward(
    params: EncoderParams, features: np.ndarray, grad_logits: np.ndarray
) -> EncoderGrads:
    """Analytic parameter gradients given d(loss)/d(logits)."""
    context = params.context(np.asarray(features).shape[1])
    windows = stack_windows(features, context)
    hidden, _ = _forward_parts(params, windows)
    g = np.asarray(grad_logits, dtype=np.float64)
    d_w_out = hidden.T @ g
    d_b_out = np.sum(g, axis=0, keepdims=True)
    d_hidden = g @ params.w_out.astype(np.float64).T
    d_pre = d_hidden * (1.0 - hidden * hidden)
    d_w_in = windows.T @ d_pre
    d_b_in = np.sum(d_pre, axis=0, keepdims=True)
    return EncoderGrads(d_w_in, d_b_in, d_w_out, d_b_out)
