"""Multi-seed directional experiment comparing fine-tuning objectives.

For each seed this generates a dataset, trains the stage-1 CTC encoder, then
fine-tunes four arms from that shared checkpoint: segment-contrastive (fdt),
mmi, mwer, and a plain-CTC control. Every arm sees the identical finetune
split for the same number of optimizer steps. The headline quantities are
rare-subset WER against the control arm and mean frame-posterior entropy.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from pathlib import Path

from .config import RunConfig, override_seed
from .evaluate import entropy_report, evaluate
from .synth import Dataset, generate_dataset
from .train import LOSS_KINDS, TrainState, finetune_stage, train_ctc_stage

DEFAULT_SEEDS = (1, 2, 3)


@dataclass(frozen=True)
class ArmMetrics:
    loss_kind: str
    general_wer: float
    rare_wer: float
    mean_entropy: float
    # optimizer steps consumed by the arm; equal across arms by construction
    steps: int


@dataclass(frozen=True)
class SeedOutcome:
    seed: int
    stage1_general_wer: float
    stage1_rare_wer: float
    arms: dict[str, ArmMetrics]
    elapsed_seconds: float

    def rare_werr(self, loss_kind: str) -> float:
        """Relative rare-WER reduction of an arm against the ctc-control arm."""
        control = self.arms["ctc-control"].rare_wer
        if control == 0.0:
            return 0.0
        return (control - self.arms[loss_kind].rare_wer) / control


@dataclass(frozen=True)
class ExperimentResult:
    outcomes: tuple[SeedOutcome, ...]

    def seeds(self) -> tuple[int, ...]:
        return tuple(o.seed for o in self.outcomes)

    def median_rare_werr(self, loss_kind: str) -> float:
        return statistics.median(o.rare_werr(loss_kind) for o in self.outcomes)

    def wins_vs_control(self, loss_kind: str) -> int:
        """Seeds where the arm's rare WER is strictly below the control's."""
        return sum(
            1
            for o in self.outcomes
            if o.arms[loss_kind].rare_wer < o.arms["ctc-control"].rare_wer
        )

    def entropy_wins_vs_control(self, loss_kind: str) -> int:
        return sum(
            1
            for o in self.outcomes
            if o.arms[loss_kind].mean_entropy > o.arms["ctc-control"].mean_entropy
        )


def run_seed(
    root: str | Path,
    seed: int,
    base_cfg: RunConfig | None = None,
    workers: int = 1,
    log=None,
) -> SeedOutcome:
    """Full pipeline for one seed: data, stage-1 CTC, four fine-tune arms."""
    t0 = time.perf_counter()
    cfg = override_seed(base_cfg or RunConfig(), seed)
    say = log or (lambda msg: None)

    say(f"[seed {seed}] generating dataset")
    dataset = generate_dataset(cfg.synth, Path(root) / f"seed{seed}")

    say(f"[seed {seed}] stage-1 ctc training")
    stage1 = train_ctc_stage(dataset, cfg, seed, log=log)
    stage1_general, _ = evaluate(
        stage1.params, dataset, "eval_general", beam=cfg.decode.beam, workers=workers
    )
    stage1_rare, _ = evaluate(
        stage1.params, dataset, "eval_rare", beam=cfg.decode.beam, workers=workers
    )
    say(
        f"[seed {seed}] stage-1 WER general={stage1_general.wer:.4f} "
        f"rare={stage1_rare.rare_wer:.4f}"
    )

    arms: dict[str, ArmMetrics] = {}
    for kind in LOSS_KINDS:
        say(f"[seed {seed}] finetune arm {kind}")
        tuned = finetune_stage(stage1, dataset, kind, cfg, seed)
        arms[kind] = measure_arm(tuned, dataset, kind, cfg, workers)
        say(
            f"[seed {seed}] {kind}: rare={arms[kind].rare_wer:.4f} "
            f"general={arms[kind].general_wer:.4f} H={arms[kind].mean_entropy:.4f}"
        )

    return SeedOutcome(
        seed=seed,
        stage1_general_wer=stage1_general.wer,
        stage1_rare_wer=stage1_rare.rare_wer,
        arms=arms,
        elapsed_seconds=time.perf_counter() - t0,
    )


def measure_arm(
    state: TrainState, dataset: Dataset, kind: str, cfg: RunConfig, workers: int
) -> ArmMetrics:
    general, _ = evaluate(
        state.params, dataset, "eval_general", beam=cfg.decode.beam, workers=workers
    )
    rare, _ = evaluate(
        state.params, dataset, "eval_rare", beam=cfg.decode.beam, workers=workers
    )
    entropy = entropy_report(state.params, dataset, "eval_general", workers=workers)
    return ArmMetrics(
        loss_kind=kind,
        general_wer=general.wer,
        rare_wer=rare.rare_wer,
        mean_entropy=entropy.mean_entropy,
        steps=state.adam.step,
    )


def run_directional_experiment(
    root: str | Path,
    seeds: tuple[int, ...] = DEFAULT_SEEDS,
    base_cfg: RunConfig | None = None,
    workers: int = 1,
    log=None,
) -> ExperimentResult:
    outcomes = tuple(
        run_seed(root, seed, base_cfg=base_cfg, workers=workers, log=log)
        for seed in seeds
    )
    return ExperimentResult(outcomes)


def summary_lines(result: ExperimentResult) -> list[str]:
    """Human-readable table of the experiment outcome."""
    lines = ["seed  arm          general  rare     entropy  rare-WERR"]
    for o in result.outcomes:
        lines.append(
            f"{o.seed:<5d} stage1       {o.stage1_general_wer:<8.4f} "
            f"{o.stage1_rare_wer:<8.4f} -        -"
        )
        for kind in LOSS_KINDS:
            arm = o.arms[kind]
            lines.append(
                f"{o.seed:<5d} {kind:<12s} {arm.general_wer:<8.4f} "
                f"{arm.rare_wer:<8.4f} {arm.mean_entropy:<8.4f} {o.rare_werr(kind):+.4f}"
            )
    for kind in ("fdt", "mmi", "mwer"):
        lines.append(
            f"median rare-WERR {kind}: {result.median_rare_werr(kind):+.4f} "
            f"(wins {result.wins_vs_control(kind)}/{len(result.outcomes)})"
        )
    return lines
