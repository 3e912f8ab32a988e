"""Decoding-based evaluation: WER reports, N-best dumps, entropy statistics.

Per-utterance work (decode, align, entropy) is embarrassingly parallel;
--workers > 1 fans it out over processes while keeping utterance order, so
results and output bytes do not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import EditStats, levenshtein_wer
from .encoder import EncoderParams, encoder_forward
from .nbest import Hypothesis, prefix_beam_search
from .numerics import row_entropies
from .synth import Dataset, Utterance
from .tokenizer import words_from_pieces

_WORKER_CTX: dict = {}


@dataclass(frozen=True)
class UtteranceScore:
    utt_id: str
    ref_words: tuple[str, ...]
    hyp_words: tuple[str, ...]
    stats: EditStats
    is_rare: bool


@dataclass(frozen=True)
class WerReport:
    """Aggregate WER with the rare-word utterance subset broken out."""

    n_utterances: int
    ref_len: int
    substitutions: int
    insertions: int
    deletions: int
    rare_n_utterances: int
    rare_ref_len: int
    rare_errors: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        return self.errors / self.ref_len

    @property
    def rare_wer(self) -> float:
        return self.rare_errors / self.rare_ref_len if self.rare_ref_len else math.nan


def _init_worker(params: EncoderParams, beam: int, n: int) -> None:
    _WORKER_CTX["params"] = params
    _WORKER_CTX["beam"] = beam
    _WORKER_CTX["n"] = n


def _decode_features(features: np.ndarray) -> list[Hypothesis]:
    grid = encoder_forward(_WORKER_CTX["params"], features)
    return prefix_beam_search(grid, beam=_WORKER_CTX["beam"], n=_WORKER_CTX["n"])


def _entropy_of_features(features: np.ndarray) -> np.ndarray:
    grid = encoder_forward(_WORKER_CTX["params"], features)
    return row_entropies(grid.values)


def _map_utterances(fn, inputs, params: EncoderParams, beam: int, n: int, workers: int):
    if workers <= 1:
        _init_worker(params, beam, n)
        return [fn(x) for x in inputs]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(params, beam, n)
    ) as pool:
        return list(pool.map(fn, inputs, chunksize=8))


def decode_split(
    params: EncoderParams,
    dataset: Dataset,
    split: str,
    beam: int,
    n: int,
    workers: int = 1,
) -> list[tuple[Utterance, list[Hypothesis]]]:
    utts = dataset.splits[split]
    features = [dataset.features(u) for u in utts]
    nbests = _map_utterances(_decode_features, features, params, beam, n, workers)
    return list(zip(utts, nbests))


def score_utterance(
    dataset: Dataset, utt: Utterance, hyp_pieces: tuple[int, ...]
) -> UtteranceScore:
    hyp_words = words_from_pieces(hyp_pieces, dataset.lexicon, dataset.vocab)
    stats = levenshtein_wer(utt.words, hyp_words)
    is_rare = any(w in dataset.rare_words for w in utt.words)
    return UtteranceScore(utt.utt_id, utt.words, hyp_words, stats, is_rare)


def aggregate_scores(scores: list[UtteranceScore]) -> WerReport:
    subs = ins = dels = ref_len = 0
    rare_n = rare_ref = rare_err = 0
    for s in scores:
        subs += s.stats.substitutions
        ins += s.stats.insertions
        dels += s.stats.deletions
        ref_len += s.stats.ref_len
        if s.is_rare:
            rare_n += 1
            rare_ref += s.stats.ref_len
            rare_err += s.stats.errors
    return WerReport(
        n_utterances=len(scores),
        ref_len=ref_len,
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        rare_n_utterances=rare_n,
        rare_ref_len=rare_ref,
        rare_errors=rare_err,
    )


def evaluate(
    params: EncoderParams,
    dataset: Dataset,
    split: str,
    beam: int = 16,
    workers: int = 1,
) -> tuple[WerReport, list[UtteranceScore]]:
    """Decode top-1 for every utterance of `split` and score against the manifest."""
    decoded = decode_split(params, dataset, split, beam=beam, n=1, workers=workers)
    scores = [
        score_utterance(dataset, utt, hyps[0].pieces if hyps else ())
        for utt, hyps in decoded
    ]
    return aggregate_scores(scores), scores


@dataclass(frozen=True)
class EntropyReport:
    mean_entropy: float
    n_frames: int
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]


def entropy_report(
    params: EncoderParams,
    dataset: Dataset,
    split: str,
    bins: int = 20,
    workers: int = 1,
) -> EntropyReport:
    """Mean per-frame posterior entropy plus a histogram over [0, log(V+1)]."""
    utts = dataset.splits[split]
    features = [dataset.features(u) for u in utts]
    per_utt = _map_utterances(_entropy_of_features, features, params, 1, 1, workers)
    values = np.concatenate(per_utt) if per_utt else np.zeros(0)
    top = math.log(params.n_symbols)
    counts, edges = np.histogram(values, bins=bins, range=(0.0, top))
    return EntropyReport(
        mean_entropy=float(np.mean(values)) if values.size else math.nan,
        n_frames=int(values.size),
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
    )
