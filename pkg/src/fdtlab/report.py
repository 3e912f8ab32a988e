"""Figure rendering for the report-style CLI paths.

The eval-wer and entropy subcommands write delimited text next to a small
set of matplotlib figures. Everything uses the Agg backend so reports can be
produced on headless machines.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EntropyReport, UtteranceScore, WerReport


def render_wer_breakdown(report: WerReport, out_path: str) -> str:
    """Bar chart of substitution/insertion/deletion counts plus WER labels."""
    fig, (ax_counts, ax_rates) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    kinds = ("substitutions", "insertions", "deletions")
    counts = (report.substitutions, report.insertions, report.deletions)
    ax_counts.bar(kinds, counts, color=("#4878d0", "#ee854a", "#6acc64"))
    ax_counts.set_ylabel("edit operations")
    ax_counts.set_title("error breakdown")
    ax_counts.tick_params(axis="x", rotation=20)

    names = ["overall"]
    rates = [report.wer]
    if report.rare_n_utterances > 0:
        names.append("rare subset")
        rates.append(report.rare_wer)
    ax_rates.bar(names, rates, color=("#444444", "#d65f5f")[: len(names)])
    ax_rates.set_ylabel("word error rate")
    ax_rates.set_ylim(0.0, max(0.05, max(rates) * 1.3))
    ax_rates.set_title("WER")
    for i, r in enumerate(rates):
        ax_rates.text(i, r, f"{r:.3f}", ha="center", va="bottom", fontsize=9)

    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_utterance_errors(scores: list[UtteranceScore], out_path: str) -> str:
    """Histogram of per-utterance error counts, rare utterances highlighted."""
    errors = np.array([s.stats.errors for s in scores], dtype=np.int64)
    rare = np.array([s.is_rare for s in scores], dtype=bool)
    top = int(errors.max()) if errors.size else 1
    bins = np.arange(-0.5, top + 1.5)

    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.hist(
        [errors[~rare], errors[rare]],
        bins=bins,
        stacked=True,
        label=("other", "rare-word"),
        color=("#4878d0", "#d65f5f"),
    )
    ax.set_xlabel("edit errors per utterance")
    ax.set_ylabel("utterances")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_entropy_histogram(report: EntropyReport, out_path: str) -> str:
    """Frame-entropy histogram with the mean marked."""
    edges = np.asarray(report.bin_edges)
    counts = np.asarray(report.counts, dtype=np.float64)
    widths = np.diff(edges)

    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.bar(edges[:-1], counts, width=widths, align="edge", color="#4878d0", edgecolor="white")
    ax.axvline(report.mean_entropy, color="#d65f5f", linewidth=1.5)
    ax.text(
        report.mean_entropy,
        counts.max() * 0.95 if counts.size else 1.0,
        f" mean={report.mean_entropy:.3f}",
        color="#d65f5f",
        fontsize=9,
        va="top",
    )
    ax.set_xlabel("per-frame posterior entropy (nats)")
    ax.set_ylabel("frames")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def figure_paths_for(tsv_path: str, names: tuple[str, ...]) -> list[str]:
    """Sibling figure paths derived from a delimited-output path."""
    stem, _ = os.path.splitext(tsv_path)
    return [f"{stem}.{name}.png" for name in names]
