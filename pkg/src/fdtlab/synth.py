"""Synthetic rare-word corpus.

Pieces are CV syllables with Gaussian prototype vectors; a word is a short
syllable sequence and its string is the concatenation of its piece strings,
which makes the lexicon self-describing. Rare words are acoustic near-clones:
each copies the piece layout of a common donor word, with fresh piece ids
whose prototypes are the donor's plus confusability_alpha * N(0, I), so an
undertrained model confuses the rare word with its donor. Utterances place
noisy prototype frames (piece_duration per piece) with silence gaps between
words and at the edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SynthConfig
from .errors import DataError
from .matrixio import read_matrices, write_matrices
from .tokenizer import (
    BLANK_SYMBOL,
    Lexicon,
    PieceVocab,
    load_lexicon,
    load_vocab,
    save_lexicon,
    save_vocab,
    tokenize,
)

_CONSONANTS = "bdfghjklmnprstvz"
_VOWELS = "aeiou"

SPLITS = ("train", "finetune", "eval_general", "eval_rare")


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    words: tuple[str, ...]
    feature_path: str


@dataclass
class Dataset:
    root: Path
    vocab: PieceVocab
    lexicon: Lexicon
    rare_words: frozenset[str]
    splits: dict[str, list[Utterance]]

    def features(self, utt: Utterance) -> np.ndarray:
        mats = read_matrices(self.root / utt.feature_path)
        if "features" not in mats:
            raise DataError(f"{utt.feature_path}: no 'features' matrix")
        return mats["features"]

    def tokenized(self, utt: Utterance):
        return tokenize(utt.words, self.lexicon, self.vocab)


@dataclass(frozen=True)
class WordInventory:
    vocab: PieceVocab
    lexicon: Lexicon
    common_words: tuple[str, ...]
    rare_words: tuple[str, ...]
    prototypes: np.ndarray  # (n pieces + 1, feature_dim); row 0 (blank) is zero


def _syllables() -> list[str]:
    return [c + v for c in _CONSONANTS for v in _VOWELS]


def build_inventory(cfg: SynthConfig) -> WordInventory:
    rng = np.random.default_rng([cfg.seed, 11])
    syllables = [_syllables()[i] for i in rng.permutation(len(_syllables()))]
    if cfg.common_pieces > len(syllables):
        raise DataError("not enough syllables for the requested piece inventory")

    piece_strings = list(syllables[: cfg.common_pieces])
    cursor = cfg.common_pieces
    prototypes = [np.zeros(cfg.feature_dim)]
    prototypes.extend(rng.normal(size=(cfg.common_pieces, cfg.feature_dim)))

    lo, hi = cfg.pieces_per_word
    entries: dict[str, tuple[int, ...]] = {}
    common: list[str] = []
    guard = 0
    while len(common) < cfg.common_words:
        guard += 1
        if guard > 100 * cfg.common_words:
            raise DataError("could not draw enough distinct common words")
        length = int(rng.integers(lo, hi + 1))
        ids = []
        for _ in range(length):
            pid = int(rng.integers(1, cfg.common_pieces + 1))
            while ids and pid == ids[-1]:  # no adjacent repeats inside a word
                pid = int(rng.integers(1, cfg.common_pieces + 1))
            ids.append(pid)
        word = "".join(piece_strings[i - 1] for i in ids)
        if word in entries:
            continue
        entries[word] = tuple(ids)
        common.append(word)

    donor_idx = rng.choice(len(common), size=cfg.rare_words, replace=False)
    rare: list[str] = []
    for di in donor_idx:
        donor = common[int(di)]
        donor_ids = entries[donor]
        new_ids = []
        for pid in donor_ids:
            if cursor >= len(syllables):
                raise DataError("ran out of syllables for rare pieces")
            piece_strings.append(syllables[cursor])
            cursor += 1
            prototypes.append(
                prototypes[pid] + cfg.confusability_alpha * rng.normal(size=cfg.feature_dim)
            )
            new_ids.append(len(piece_strings))
        word = "".join(piece_strings[i - 1] for i in new_ids)
        if word in entries:
            raise DataError(f"rare word {word!r} collides with an existing word")
        entries[word] = tuple(new_ids)
        rare.append(word)

    vocab = PieceVocab((BLANK_SYMBOL, *piece_strings))
    return WordInventory(
        vocab=vocab,
        lexicon=Lexicon(entries),
        common_words=tuple(common),
        rare_words=tuple(rare),
        prototypes=np.asarray(prototypes),
    )


def _draw_words(
    inv: WordInventory, cfg: SynthConfig, rng: np.random.Generator, force_one_rare: bool
) -> tuple[str, ...]:
    lo, hi = cfg.words_per_utterance
    count = int(rng.integers(lo, hi + 1))
    words = []
    for _ in range(count):
        if not force_one_rare and rng.random() < cfg.rare_train_fraction:
            words.append(inv.rare_words[int(rng.integers(len(inv.rare_words)))])
        else:
            words.append(inv.common_words[int(rng.integers(len(inv.common_words)))])
    if force_one_rare:
        slot = int(rng.integers(count))
        words[slot] = inv.rare_words[int(rng.integers(len(inv.rare_words)))]
    return tuple(words)


def _render_features(
    inv: WordInventory, cfg: SynthConfig, words: tuple[str, ...], rng: np.random.Generator
) -> np.ndarray:
    dlo, dhi = cfg.piece_duration
    slo, shi = cfg.silence
    rows: list[np.ndarray] = []

    def silence_block() -> None:
        frames = int(rng.integers(slo, shi + 1))
        if frames:
            rows.append(cfg.noise_sigma * rng.normal(size=(frames, cfg.feature_dim)))

    silence_block()
    for w, word in enumerate(words):
        if w:
            silence_block()
        for pid in inv.lexicon.entries[word]:
            duration = int(rng.integers(dlo, dhi + 1))
            block = inv.prototypes[pid] + cfg.noise_sigma * rng.normal(
                size=(duration, cfg.feature_dim)
            )
            rows.append(block)
    silence_block()
    return np.concatenate(rows, axis=0)


def generate_dataset(cfg: SynthConfig, out_dir: str | Path) -> Dataset:
    """Write vocab, lexicon, manifests, and per-utterance feature files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inv = build_inventory(cfg)
    save_vocab(inv.vocab, out / "vocab.txt")
    save_lexicon(inv.lexicon, inv.vocab, out / "lexicon.tsv")
    (out / "rare_words.txt").write_text("\n".join(inv.rare_words) + "\n", encoding="utf-8")

    sizes = {
        "train": cfg.train_size,
        "finetune": cfg.finetune_size,
        "eval_general": cfg.eval_general_size,
        "eval_rare": cfg.eval_rare_size,
    }
    splits: dict[str, list[Utterance]] = {}
    for split_index, split in enumerate(SPLITS):
        rng = np.random.default_rng([cfg.seed, 100 + split_index])
        feat_dir = out / "feats" / split
        feat_dir.mkdir(parents=True, exist_ok=True)
        utts = []
        lines = []
        for i in range(sizes[split]):
            utt_id = f"{split}-{i:05d}"
            words = _draw_words(inv, cfg, rng, force_one_rare=(split == "eval_rare"))
            feats = _render_features(inv, cfg, words, rng)
            rel = f"feats/{split}/{utt_id}.fdtm"
            write_matrices(out / rel, {"features": feats})
            utts.append(Utterance(utt_id, words, rel))
            lines.append(f"{utt_id}\t{rel}\t{' '.join(words)}")
        (out / f"manifest_{split}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        splits[split] = utts
    return Dataset(out, inv.vocab, inv.lexicon, frozenset(inv.rare_words), splits)


def load_dataset(root: str | Path) -> Dataset:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset directory {root} does not exist")
    vocab = load_vocab(root / "vocab.txt")
    lexicon = load_lexicon(root / "lexicon.tsv", vocab)
    rare_path = root / "rare_words.txt"
    rare = frozenset(
        line.strip() for line in rare_path.read_text(encoding="utf-8").splitlines() if line.strip()
    ) if rare_path.exists() else frozenset()
    splits: dict[str, list[Utterance]] = {}
    for split in SPLITS:
        manifest = root / f"manifest_{split}.tsv"
        if not manifest.exists():
            continue
        utts = []
        for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{manifest}:{lineno}: expected 3 tab-separated fields")
            utt_id, rel, word_field = parts
            utts.append(Utterance(utt_id, tuple(word_field.split()), rel))
        splits[split] = utts
    if not splits:
        raise DataError(f"{root}: no manifest files found")
    return Dataset(root, vocab, lexicon, rare, splits)
