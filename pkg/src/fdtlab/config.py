"""Run configuration: a nested YAML document with strict key checking."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic rare-word task parameters."""

    seed: int = 1
    feature_dim: int = 16
    common_words: int = 40
    rare_words: int = 8
    rare_train_fraction: float = 0.02
    piece_duration: tuple[int, int] = (2, 4)
    silence: tuple[int, int] = (0, 2)
    noise_sigma: float = 0.5
    confusability_alpha: float = 0.3
    train_size: int = 2000
    finetune_size: int = 500
    eval_general_size: int = 200
    eval_rare_size: int = 200
    words_per_utterance: tuple[int, int] = (3, 8)
    pieces_per_word: tuple[int, int] = (1, 3)
    common_pieces: int = 12

    def __post_init__(self) -> None:
        counts = (
            self.feature_dim,
            self.common_words,
            self.rare_words,
            self.train_size,
            self.finetune_size,
            self.eval_general_size,
            self.eval_rare_size,
            self.common_pieces,
        )
        if any(c < 1 for c in counts):
            raise ConfigError("all synth counts must be positive")
        if not 0.0 <= self.rare_train_fraction <= 1.0:
            raise ConfigError("rare_train_fraction must be in [0, 1]")
        if self.noise_sigma < 0 or self.confusability_alpha < 0:
            raise ConfigError("noise_sigma and confusability_alpha must be >= 0")
        for name, (lo, hi) in (
            ("piece_duration", self.piece_duration),
            ("silence", self.silence),
            ("words_per_utterance", self.words_per_utterance),
            ("pieces_per_word", self.pieces_per_word),
        ):
            if lo > hi or lo < 0:
                raise ConfigError(f"{name} range ({lo}, {hi}) invalid")
        if self.piece_duration[0] < 1 or self.words_per_utterance[0] < 1:
            raise ConfigError("piece_duration and words_per_utterance need positive minima")
        if self.pieces_per_word[0] < 1:
            raise ConfigError("pieces_per_word needs a positive minimum")


@dataclass(frozen=True)
class EncoderConfig:
    context: int = 5
    hidden: int = 64

    def __post_init__(self) -> None:
        if self.context < 1 or self.hidden < 1:
            raise ConfigError("encoder context and hidden must be positive")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch: int = 8
    epochs: int = 20

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.batch < 1 or self.epochs < 1:
            raise ConfigError("lr, batch, epochs must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("betas must be in [0, 1)")


@dataclass(frozen=True)
class FinetuneConfig:
    # Gentler than the stage-1 rate: the discriminative updates concentrate
    # on a small slice of the data and diverge quickly at 1e-3.
    lr: float = 3e-4
    ctc_weight: float = 0.1
    epochs: int = 1
    # E-step list size. Top-1 makes correctly decoded utterances contribute
    # nothing, so the discriminative arms all train on detected errors only.
    nbest: int = 1

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.epochs < 1:
            raise ConfigError("finetune lr and epochs must be positive")
        if not 0.0 <= self.ctc_weight <= 1.0:
            raise ConfigError("ctc_weight must be in [0, 1]")
        if self.nbest < 1:
            raise ConfigError("finetune nbest must be at least 1")


@dataclass(frozen=True)
class DecodeConfig:
    beam: int = 16
    n: int = 4

    def __post_init__(self) -> None:
        if self.beam < 1 or self.n < 1:
            raise ConfigError("beam and n must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)


_SECTIONS = {
    "synth": SynthConfig,
    "encoder": EncoderConfig,
    "train": TrainConfig,
    "finetune": FinetuneConfig,
    "decode": DecodeConfig,
}

_TUPLE_FIELDS = {"piece_duration", "silence", "words_per_utterance", "pieces_per_word"}


def _build_section(cls, mapping: dict, section: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key}")
        if key in _TUPLE_FIELDS:
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise ConfigError(f"{section}.{key} must be a two-element range")
            value = (int(value[0]), int(value[1]))
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in section {section!r}: {exc}") from exc


def config_from_mapping(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    sections = {}
    for key, value in doc.items():
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config section {key!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"section {key!r} must be a mapping")
        sections[key] = _build_section(_SECTIONS[key], value, key)
    return RunConfig(**sections)


def load_run_config(path: str | Path | None) -> RunConfig:
    """Load a YAML run config; None gives the built-in defaults."""
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    return config_from_mapping(doc)


def config_to_mapping(cfg: RunConfig) -> dict:
    out = dataclasses.asdict(cfg)

    def tuples_to_lists(node):
        if isinstance(node, dict):
            return {k: tuples_to_lists(v) for k, v in node.items()}
        if isinstance(node, tuple):
            return [tuples_to_lists(v) for v in node]
        return node

    return tuples_to_lists(out)


def config_hash(cfg: RunConfig) -> str:
    """Stable content hash of the resolved configuration."""
    canonical = json.dumps(config_to_mapping(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_run_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(config_to_mapping(cfg), sort_keys=True), encoding="utf-8"
    )


def override_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return cfg
    return dataclasses.replace(cfg, synth=dataclasses.replace(cfg.synth, seed=int(seed)))
