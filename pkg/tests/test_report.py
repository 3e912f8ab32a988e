"""Figure rendering: files appear and carry PNG content."""

from fdtlab.baselines import EditStats
from fdtlab.evaluate import EntropyReport, UtteranceScore, WerReport
from fdtlab.report import (
    figure_paths_for,
    render_entropy_histogram,
    render_utterance_errors,
    render_wer_breakdown,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _report():
    return WerReport(
        n_utterances=4,
        ref_len=12,
        substitutions=2,
        insertions=1,
        deletions=1,
        rare_n_utterances=2,
        rare_ref_len=6,
        rare_errors=3,
    )


def _scores():
    return [
        UtteranceScore("a", ("x", "y"), ("x", "y"), EditStats(0, 0, 0, 2), False),
        UtteranceScore("b", ("x", "y", "z"), ("x",), EditStats(0, 0, 2, 3), True),
        UtteranceScore("c", ("x",), ("y", "x"), EditStats(0, 1, 0, 1), True),
    ]


def test_figure_paths_for():
    paths = figure_paths_for("/tmp/out/report.tsv", ("breakdown", "per_utt"))
    assert paths == ["/tmp/out/report.breakdown.png", "/tmp/out/report.per_utt.png"]
    (single,) = figure_paths_for("entropy.tsv", ("entropy",))
    assert single == "entropy.entropy.png"


def test_render_wer_breakdown(tmp_path):
    out = str(tmp_path / "wer.png")
    assert render_wer_breakdown(_report(), out) == out
    assert (tmp_path / "wer.png").read_bytes()[:8] == PNG_MAGIC


def test_render_wer_breakdown_without_rare_subset(tmp_path):
    report = WerReport(2, 5, 1, 0, 0, 0, 0, 0)
    out = str(tmp_path / "wer2.png")
    render_wer_breakdown(report, out)
    assert (tmp_path / "wer2.png").read_bytes()[:8] == PNG_MAGIC


def test_render_utterance_errors(tmp_path):
    out = str(tmp_path / "per_utt.png")
    render_utterance_errors(_scores(), out)
    assert (tmp_path / "per_utt.png").read_bytes()[:8] == PNG_MAGIC


def test_render_entropy_histogram(tmp_path):
    report = EntropyReport(
        mean_entropy=0.8,
        n_frames=100,
        bin_edges=(0.0, 0.5, 1.0, 1.5),
        counts=(30, 50, 20),
    )
    out = str(tmp_path / "entropy.png")
    render_entropy_histogram(report, out)
    assert (tmp_path / "entropy.png").read_bytes()[:8] == PNG_MAGIC
