"""Command-line interface.

One binary with subcommands covering the whole pipeline: data synthesis,
two-stage training, decoding, alignment dumps, WER and entropy reports, and
the finite-difference gradient suites. Failures print a one-line JSON error
record to stderr and exit with a stable code: 2 usage, 3 config, 4 data,
5 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_run_config, override_seed, save_run_config
from .ctc import LogPosteriorGrid
from .errors import ConfigError, DataError, DivergenceError, FdtLabError
from .evaluate import decode_split, entropy_report, evaluate
from .fdt import detect_error_segments, segment_by_words
from .gradcheck import run_all_checks
from .matrixio import read_matrices
from .nbest import nbest_posteriors, prefix_beam_search
from .synth import generate_dataset, load_dataset
from .tokenizer import PieceVocab, TokenizedUtterance, load_vocab
from .train import (
    LOSS_KINDS,
    finetune_stage,
    load_checkpoint,
    save_checkpoint,
    train_ctc_stage,
)

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_DIVERGED = 5


class _Parser(argparse.ArgumentParser):
    """argparse that emits the same JSON error record as everything else."""

    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        print(json.dumps({"error": "UsageError", "message": message}), file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="run configuration file (YAML)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")


def _load_cfg(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = override_seed(cfg, args.seed)
    return cfg


def _seed_of(args: argparse.Namespace, cfg: RunConfig) -> int:
    return args.seed if args.seed is not None else cfg.synth.seed


def _write_lines(path: str | Path, lines: list[str]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_grid(path: str) -> LogPosteriorGrid:
    mats = read_matrices(path)
    if "logp" not in mats:
        raise DataError(f"{path}: no 'logp' matrix in container")
    return LogPosteriorGrid(mats["logp"].astype(np.float64))


def _piece_strings(vocab: PieceVocab, pieces: tuple[int, ...]) -> str:
    return " ".join(vocab.piece_string(p) for p in pieces)


def _log_print(msg: str) -> None:
    print(msg)


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    dataset = generate_dataset(cfg.synth, args.out)
    save_run_config(cfg, Path(args.out) / "run_config.yaml")
    for split, utts in dataset.splits.items():
        print(f"{split}: {len(utts)} utterances")
    print(f"vocab: {dataset.vocab.n_pieces} pieces, {len(dataset.rare_words)} rare words")
    return 0


def cmd_train_ctc(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    dataset = load_dataset(args.data)
    state = train_ctc_stage(dataset, cfg, _seed_of(args, cfg), log=_log_print)
    save_checkpoint(state, args.out)
    print(f"checkpoint: {args.out}")
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    dataset = load_dataset(args.data)
    state = load_checkpoint(args.ckpt)
    seed = args.seed if args.seed is not None else state.seed
    tuned = finetune_stage(
        state, dataset, args.loss, cfg, seed, split=args.split, log=_log_print
    )
    save_checkpoint(tuned, args.out)
    print(f"checkpoint: {args.out}")
    return 0


def _decode_grid_lines(args: argparse.Namespace) -> list[str]:
    grid = _load_grid(args.grid)
    vocab = load_vocab(args.vocab)
    hyps = prefix_beam_search(grid, beam=args.beam, n=args.n)
    return [
        f"grid\t{rank}\t{h.log_score:.10g}\t{_piece_strings(vocab, h.pieces)}"
        for rank, h in enumerate(hyps, start=1)
    ]


def cmd_decode(args: argparse.Namespace) -> int:
    if args.grid is not None:
        if args.vocab is None:
            raise ConfigError("--grid mode requires --vocab")
        lines = _decode_grid_lines(args)
    else:
        if args.data is None or args.ckpt is None or args.split is None:
            raise ConfigError("decode needs --data, --ckpt and --split (or --grid)")
        dataset = load_dataset(args.data)
        state = load_checkpoint(args.ckpt)
        decoded = decode_split(
            state.params, dataset, args.split, beam=args.beam, n=args.n,
            workers=args.workers,
        )
        lines = []
        for utt, hyps in decoded:
            for rank, h in enumerate(hyps, start=1):
                pieces = _piece_strings(dataset.vocab, h.pieces)
                lines.append(f"{utt.utt_id}\t{rank}\t{h.log_score:.10g}\t{pieces}")
    _write_lines(args.out, lines)
    print(f"wrote {len(lines)} hypothesis rows to {args.out}")
    return 0


def _parse_word_pieces(spec: str, vocab: PieceVocab) -> TokenizedUtterance:
    """Parse "a,b c" into a two-word utterance with pieces (a,b) and (c,)."""
    words = []
    pieces: list[int] = []
    spans = []
    for group in spec.split():
        ids = tuple(vocab.piece_id(s) for s in group.split(","))
        spans.append((len(pieces), len(pieces) + len(ids)))
        pieces.extend(ids)
        words.append("".join(group.split(",")))
    if not words:
        raise ConfigError("--word-pieces is empty")
    return TokenizedUtterance(tuple(words), tuple(pieces), tuple(spans))


def _align_lines_for(
    utt_id: str,
    grid: LogPosteriorGrid,
    ref: TokenizedUtterance,
    vocab: PieceVocab,
    hyps,
) -> list[str]:
    seg = segment_by_words(grid, ref)
    align = seg.alignment
    marks = " ".join(
        f"{vocab.piece_string(p)}@{t}"
        for p, t in zip(align.labels, align.emission_frames)
    )
    lines = [f"utt\t{utt_id}\t{grid.n_frames}", f"refalign\t{utt_id}\t{marks}"]
    for k, (word, (t0, t1)) in enumerate(zip(seg.words, seg.frame_spans)):
        lines.append(f"word\t{utt_id}\t{k}\t{word}\t{t0}\t{t1}")
    if hyps:
        nbest = nbest_posteriors(hyps)
        for rank, (h, post) in enumerate(zip(nbest.hyps, nbest.posteriors), start=1):
            pieces = _piece_strings(vocab, h.pieces)
            lines.append(
                f"hyp\t{utt_id}\t{rank}\t{post:.10g}\t{h.log_score:.10g}\t{pieces}"
            )
            for es in detect_error_segments(grid, ref, h, seg, hyp_weight=post):
                refs = ",".join(vocab.piece_string(p) for p in es.ref_pieces) or "-"
                errs = ",".join(vocab.piece_string(p) for p in es.err_pieces) or "-"
                lines.append(
                    f"errseg\t{utt_id}\t{rank}\t{es.word_index}\t"
                    f"{es.frame_span[0]}\t{es.frame_span[1]}\tref={refs}\terr={errs}"
                )
    return lines


def cmd_align(args: argparse.Namespace) -> int:
    lines: list[str] = []
    if args.grid is not None:
        if args.vocab is None or args.word_pieces is None:
            raise ConfigError("--grid mode requires --vocab and --word-pieces")
        vocab = load_vocab(args.vocab)
        grid = _load_grid(args.grid)
        ref = _parse_word_pieces(args.word_pieces, vocab)
        lines = _align_lines_for("grid", grid, ref, vocab, hyps=None)
    else:
        if args.data is None or args.ckpt is None or args.split is None:
            raise ConfigError("align needs --data, --ckpt and --split (or --grid)")
        dataset = load_dataset(args.data)
        state = load_checkpoint(args.ckpt)
        decoded = decode_split(
            state.params, dataset, args.split, beam=args.beam, n=args.n,
            workers=args.workers,
        )
        from .encoder import encoder_forward

        for utt, hyps in decoded:
            grid = encoder_forward(state.params, dataset.features(utt))
            ref = dataset.tokenized(utt)
            lines.extend(_align_lines_for(utt.utt_id, grid, ref, dataset.vocab, hyps))
    _write_lines(args.out, lines)
    print(f"wrote {len(lines)} rows to {args.out}")
    return 0


def cmd_eval_wer(args: argparse.Namespace) -> int:
    from .report import figure_paths_for, render_utterance_errors, render_wer_breakdown

    dataset = load_dataset(args.data)
    state = load_checkpoint(args.ckpt)
    report, scores = evaluate(
        state.params, dataset, args.split, beam=args.beam, workers=args.workers
    )
    lines = []
    for s in scores:
        hyp = " ".join(s.hyp_words)
        lines.append(
            f"utt\t{s.utt_id}\t{s.stats.ref_len}\t{s.stats.substitutions}\t"
            f"{s.stats.insertions}\t{s.stats.deletions}\t{int(s.is_rare)}\t{hyp}"
        )
    lines.append(
        f"summary\toverall\t{report.n_utterances}\t{report.ref_len}\t"
        f"{report.substitutions}\t{report.insertions}\t{report.deletions}\t"
        f"{report.wer:.6f}"
    )
    lines.append(
        f"summary\trare\t{report.rare_n_utterances}\t{report.rare_ref_len}\t"
        f"{report.rare_errors}\t{report.rare_wer:.6f}"
    )
    _write_lines(args.out, lines)
    fig_breakdown, fig_hist = figure_paths_for(args.out, ("breakdown", "per_utt"))
    render_wer_breakdown(report, fig_breakdown)
    render_utterance_errors(scores, fig_hist)
    print(f"WER {report.wer:.4f} (rare {report.rare_wer:.4f}) on {args.split}")
    print(f"report: {args.out}")
    print(f"figures: {fig_breakdown} {fig_hist}")
    return 0


def cmd_entropy(args: argparse.Namespace) -> int:
    from .report import figure_paths_for, render_entropy_histogram

    dataset = load_dataset(args.data)
    state = load_checkpoint(args.ckpt)
    report = entropy_report(
        state.params, dataset, args.split, bins=args.bins, workers=args.workers
    )
    lines = [f"mean\t{report.mean_entropy:.10g}\t{report.n_frames}"]
    for lo, hi, count in zip(report.bin_edges, report.bin_edges[1:], report.counts):
        lines.append(f"bin\t{lo:.10g}\t{hi:.10g}\t{count}")
    _write_lines(args.out, lines)
    (fig_path,) = figure_paths_for(args.out, ("entropy",))
    render_entropy_histogram(report, fig_path)
    print(f"mean entropy {report.mean_entropy:.4f} over {report.n_frames} frames")
    print(f"report: {args.out}")
    print(f"figure: {fig_path}")
    return 0


def cmd_grad_check(args: argparse.Namespace) -> int:
    results = run_all_checks(args.seed if args.seed is not None else 0)
    failed = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{r.name}: max rel err {r.max_rel_err:.3e} (tol {r.tolerance:.1e}) {mark}")
        if not r.passed:
            failed.append(r.name)
    if failed:
        raise DivergenceError(f"gradient checks failed: {', '.join(failed)}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fdtlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize a dataset")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train-ctc", help="stage-1 CTC training")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_ctc)

    p = sub.add_parser("finetune", help="discriminative fine-tuning")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--loss", required=True, choices=LOSS_KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="finetune")
    p.set_defaults(fn=cmd_finetune)

    p = sub.add_parser("decode", help="N-best decoding")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--ckpt")
    p.add_argument("--split")
    p.add_argument("--grid", help="decode a raw log-posterior container instead")
    p.add_argument("--vocab", help="piece vocabulary for --grid mode")
    p.add_argument("--beam", type=int, default=16)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("align", help="alignment, word segments, error segments")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--ckpt")
    p.add_argument("--split")
    p.add_argument("--grid", help="align a raw log-posterior container instead")
    p.add_argument("--vocab", help="piece vocabulary for --grid mode")
    p.add_argument("--word-pieces", help='reference for --grid mode, e.g. "a,b c"')
    p.add_argument("--beam", type=int, default=16)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("eval-wer", help="WER report with figures")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--beam", type=int, default=16)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval_wer)

    p = sub.add_parser("entropy", help="frame-entropy report with figure")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_entropy)

    p = sub.add_parser("grad-check", help="finite-difference gradient suites")
    _add_common(p)
    p.set_defaults(fn=cmd_grad_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except DivergenceError as exc:
        _emit_error(exc)
        return EXIT_DIVERGED
    except FdtLabError as exc:
        # DataError and the label/span family: the inputs are at fault.
        _emit_error(exc)
        return EXIT_DATA


def _emit_error(exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
