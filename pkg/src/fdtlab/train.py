"""Training loops: CTC stage, discriminative fine-tuning, checkpoints.

Gradients are averaged over each batch in a fixed utterance order and applied
with an adaptive-moment update. Parameters and moments stay float32 (the
checkpoint precision) while the update math runs in float64, so a saved and
reloaded state continues bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import mmi_loss_grad, mwer_loss_grad
from .config import RunConfig, config_hash
from .ctc import LogPosteriorGrid, ctc_forward_loss, ctc_grad_logits
from .encoder import EncoderParams, encoder_backward, encoder_forward, init_encoder
from .errors import DataError, DivergenceError
from .fdt import fdt_utterance_loss_grad, logp_grad_to_logits
from .matrixio import read_matrices, write_matrices
from .nbest import nbest_posteriors, prefix_beam_search
from .synth import Dataset, Utterance
from .tokenizer import TokenizedUtterance, words_from_pieces

LOSS_KINDS = ("fdt", "mmi", "mwer", "ctc-control")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @staticmethod
    def zeros_like(params: EncoderParams) -> "AdamState":
        return AdamState(
            m={k: np.zeros_like(a) for k, a in params.as_dict().items()},
            v={k: np.zeros_like(a) for k, a in params.as_dict().items()},
        )


@dataclass
class TrainState:
    params: EncoderParams
    adam: AdamState
    seed: int
    config_hash: str
    epoch_losses: list[float] = field(default_factory=list)


def adam_update(
    params: EncoderParams,
    grads: dict[str, np.ndarray],
    adam: AdamState,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One in-place update step; float64 math, float32 storage."""
    adam.step += 1
    t = adam.step
    bias1 = 1.0 - beta1**t
    bias2 = 1.0 - beta2**t
    for name, arr in params.as_dict().items():
        g = np.asarray(grads[name], dtype=np.float64)
        m = beta1 * adam.m[name].astype(np.float64) + (1.0 - beta1) * g
        v = beta2 * adam.v[name].astype(np.float64) + (1.0 - beta2) * g * g
        adam.m[name] = m.astype(np.float32)
        adam.v[name] = v.astype(np.float32)
        step = lr * (m / bias1) / (np.sqrt(v / bias2) + eps)
        arr -= step.astype(np.float32)


def save_checkpoint(state: TrainState, path: str | Path) -> None:
    """Write `<path>` (matrices) and `<path>.meta.json` (scalars)."""
    path = Path(path)
    mats = dict(state.params.as_dict())
    for name, arr in state.adam.m.items():
        mats[f"adam_m_{name}"] = arr
    for name, arr in state.adam.v.items():
        mats[f"adam_v_{name}"] = arr
    write_matrices(path, mats)
    meta = {
        "step": state.adam.step,
        "seed": state.seed,
        "config_hash": state.config_hash,
        "epoch_losses": state.epoch_losses,
    }
    Path(str(path) + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_checkpoint(path: str | Path) -> TrainState:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint {path} does not exist")
    mats = read_matrices(path)
    try:
        params = EncoderParams.from_dict(mats)
        adam = AdamState(
            m={k: mats[f"adam_m_{k}"] for k in params.as_dict()},
            v={k: mats[f"adam_v_{k}"] for k in params.as_dict()},
        )
    except KeyError as exc:
        raise DataError(f"checkpoint {path} is missing matrix {exc}") from exc
    meta_path = Path(str(path) + ".meta.json")
    if not meta_path.exists():
        raise DataError(f"checkpoint metadata {meta_path} does not exist")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    adam.step = int(meta["step"])
    return TrainState(
        params=params,
        adam=adam,
        seed=int(meta["seed"]),
        config_hash=str(meta["config_hash"]),
        epoch_losses=[float(x) for x in meta.get("epoch_losses", [])],
    )


@dataclass
class _Prepared:
    """An utterance with features loaded and reference tokenized."""

    utt: Utterance
    features: np.ndarray
    ref: TokenizedUtterance


def prepare_split(dataset: Dataset, split: str) -> list[_Prepared]:
    if split not in dataset.splits:
        raise DataError(f"dataset has no split {split!r}")
    out = []
    for utt in dataset.splits[split]:
        out.append(_Prepared(utt, dataset.features(utt), dataset.tokenized(utt)))
    return out


def utterance_loss_grad_logits(
    grid: LogPosteriorGrid,
    ref: TokenizedUtterance,
    kind: str,
    run_cfg: RunConfig,
    to_words=None,
) -> tuple[float, np.ndarray]:
    """Loss and logit gradient for one utterance under the chosen objective.

    Discriminative kinds mix with CTC as
    (1 - ctc_weight) * discriminative + ctc_weight * CTC; the control arm is
    plain CTC.
    """
    ctc_loss = ctc_forward_loss(grid, ref.pieces)
    ctc_grad = ctc_grad_logits(grid, ref.pieces)
    if kind == "ctc-control" or kind == "ctc":
        return ctc_loss, ctc_grad

    hyps = prefix_beam_search(grid, beam=run_cfg.decode.beam, n=run_cfg.finetune.nbest)
    nbest = nbest_posteriors(hyps)
    if kind == "fdt":
        result = fdt_utterance_loss_grad(grid, ref, nbest)
        if result.utterance_skipped:
            # No flagged segment in any hypothesis: the utterance takes no
            # part in this update, not even through the CTC mixing term.
            return 0.0, np.zeros_like(grid.values)
        disc_loss = result.loss
        disc_grad = logp_grad_to_logits(result.grad_logp, grid)
    elif kind == "mmi":
        disc_loss, disc_grad = mmi_loss_grad(grid, ref, nbest)
    elif kind == "mwer":
        disc_loss, disc_grad = mwer_loss_grad(grid, ref, nbest, to_words=to_words)
    else:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    lam = run_cfg.finetune.ctc_weight
    loss = (1.0 - lam) * disc_loss + lam * ctc_loss
    grad = (1.0 - lam) * disc_grad + lam * ctc_grad
    return loss, grad


def _run_epochs(
    state: TrainState,
    prepared: list[_Prepared],
    run_cfg: RunConfig,
    kind: str,
    lr: float,
    epochs: int,
    seed: int,
    to_words,
    log=None,
) -> TrainState:
    tc = run_cfg.train
    for epoch in range(epochs):
        order = np.random.default_rng([seed, 7, epoch]).permutation(len(prepared))
        total = 0.0
        for lo in range(0, len(order), tc.batch):
            batch = [prepared[i] for i in order[lo : lo + tc.batch]]
            grads = {k: np.zeros(a.shape, dtype=np.float64) for k, a in state.params.as_dict().items()}
            for item in batch:
                grid = encoder_forward(state.params, item.features)
                loss, grad_logits = utterance_loss_grad_logits(
                    grid, item.ref, kind, run_cfg, to_words=to_words
                )
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"non-finite loss on {item.utt.utt_id} at step {state.adam.step}"
                    )
                total += loss
                enc_grads = encoder_backward(state.params, item.features, grad_logits)
                for name, g in enc_grads.as_dict().items():
                    grads[name] += g
            for name in grads:
                grads[name] /= len(batch)
            adam_update(state.params, grads, state.adam, lr, tc.beta1, tc.beta2, tc.eps)
        for arr in state.params.as_dict().values():
            if not np.all(np.isfinite(arr)):
                raise DivergenceError(f"non-finite parameters after epoch {epoch}")
        mean = float(total / len(prepared))
        state.epoch_losses.append(mean)
        if log is not None:
            log(f"epoch {epoch}: mean {kind} loss {mean:.6f}")
    return state


def train_ctc_stage(
    dataset: Dataset, run_cfg: RunConfig, seed: int, log=None
) -> TrainState:
    """Stage 1: CTC training from random initialization on the train split."""
    prepared = prepare_split(dataset, "train")
    rng = np.random.default_rng([seed, 42])
    params = init_encoder(
        rng,
        feature_dim=run_cfg.synth.feature_dim,
        n_symbols=dataset.vocab.n_pieces + 1,
        context=run_cfg.encoder.context,
        hidden=run_cfg.encoder.hidden,
    )
    state = TrainState(
        params=params,
        adam=AdamState.zeros_like(params),
        seed=seed,
        config_hash=config_hash(run_cfg),
    )
    return _run_epochs(
        state,
        prepared,
        run_cfg,
        kind="ctc",
        lr=run_cfg.train.lr,
        epochs=run_cfg.train.epochs,
        seed=seed,
        to_words=None,
        log=log,
    )


def finetune_stage(
    state: TrainState,
    dataset: Dataset,
    kind: str,
    run_cfg: RunConfig,
    seed: int,
    split: str = "finetune",
    log=None,
) -> TrainState:
    """Fine-tune a trained state with one of the discriminative objectives."""
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    prepared = prepare_split(dataset, split)
    to_words = None
    if kind == "mwer":
        to_words = lambda pieces: words_from_pieces(pieces, dataset.lexicon, dataset.vocab)
    fresh = TrainState(
        params=EncoderParams.from_dict(
            {k: a.copy() for k, a in state.params.as_dict().items()}
        ),
        adam=AdamState.zeros_like(state.params),  # new objective, fresh moments
        seed=seed,
        config_hash=state.config_hash,
        epoch_losses=[],
    )
    return _run_epochs(
        fresh,
        prepared,
        run_cfg,
        kind=kind,
        lr=run_cfg.finetune.lr,
        epochs=run_cfg.finetune.epochs,
        seed=seed,
        to_words=to_words,
        log=log,
    )
