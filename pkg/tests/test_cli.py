"""End-to-end command-line tests on a miniature corpus."""

import json

import numpy as np
import pytest

from fdtlab.cli import main
from fdtlab.matrixio import write_matrices
from fdtlab.numerics import log_softmax
from fdtlab.tokenizer import BLANK_SYMBOL, PieceVocab, save_vocab

CONFIG_YAML = """\
synth:
  seed: 21
  feature_dim: 4
  common_words: 6
  rare_words: 2
  train_size: 6
  finetune_size: 4
  eval_general_size: 3
  eval_rare_size: 3
  common_pieces: 6
  words_per_utterance: [2, 3]
encoder:
  context: 3
  hidden: 16
train:
  epochs: 2
decode:
  beam: 4
  n: 2
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.yaml"
    cfg.write_text(CONFIG_YAML, encoding="utf-8")
    data = root / "data"
    ck1 = root / "stage1.fdtm"
    assert main(["gen-data", "--config", str(cfg), "--out", str(data)]) == 0
    assert main(
        ["train-ctc", "--config", str(cfg), "--data", str(data), "--out", str(ck1)]
    ) == 0
    return {"root": root, "cfg": str(cfg), "data": str(data), "ckpt": str(ck1)}


def test_gen_data_outputs(workdir):
    data = workdir["root"] / "data"
    for name in (
        "vocab.txt",
        "lexicon.tsv",
        "rare_words.txt",
        "run_config.yaml",
        "manifest_train.tsv",
        "manifest_finetune.tsv",
        "manifest_eval_general.tsv",
        "manifest_eval_rare.tsv",
    ):
        assert (data / name).exists(), name


def test_train_ctc_outputs(workdir):
    root = workdir["root"]
    assert (root / "stage1.fdtm").exists()
    meta = json.loads((root / "stage1.fdtm.meta.json").read_text())
    assert meta["seed"] == 21
    assert len(meta["epoch_losses"]) == 2


def test_finetune_each_kind(workdir):
    for kind in ("fdt", "mmi", "mwer", "ctc-control"):
        out = workdir["root"] / f"ft_{kind}.fdtm"
        code = main(
            [
                "finetune",
                "--config", workdir["cfg"],
                "--data", workdir["data"],
                "--ckpt", workdir["ckpt"],
                "--loss", kind,
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.exists()


def test_decode_writes_ranked_rows_and_is_deterministic(workdir):
    out1 = workdir["root"] / "dec1.tsv"
    out2 = workdir["root"] / "dec2.tsv"
    argv = [
        "decode",
        "--data", workdir["data"],
        "--ckpt", workdir["ckpt"],
        "--split", "eval_general",
        "--beam", "4",
        "--n", "2",
        "--workers", "1",
    ]
    assert main(argv + ["--out", str(out1)]) == 0
    assert main(argv + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert lines
    for line in lines:
        utt_id, rank, score, _pieces = line.split("\t")
        assert utt_id.startswith("eval_general-")
        assert int(rank) in (1, 2)
        float(score)


def test_eval_wer_writes_tsv_and_figures(workdir):
    out = workdir["root"] / "reports" / "wer.tsv"
    code = main(
        [
            "eval-wer",
            "--data", workdir["data"],
            "--ckpt", workdir["ckpt"],
            "--split", "eval_rare",
            "--beam", "4",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    utt_rows = [l for l in lines if l.startswith("utt\t")]
    assert len(utt_rows) == 3
    assert lines[-2].startswith("summary\toverall\t")
    assert lines[-1].startswith("summary\trare\t")
    # Figures land next to the delimited report.
    assert (workdir["root"] / "reports" / "wer.breakdown.png").exists()
    assert (workdir["root"] / "reports" / "wer.per_utt.png").exists()


def test_entropy_writes_tsv_and_figure(workdir):
    out = workdir["root"] / "reports" / "entropy.tsv"
    code = main(
        [
            "entropy",
            "--data", workdir["data"],
            "--ckpt", workdir["ckpt"],
            "--split", "eval_general",
            "--bins", "8",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("mean\t")
    assert len([l for l in lines if l.startswith("bin\t")]) == 8
    assert (workdir["root"] / "reports" / "entropy.entropy.png").exists()


def _write_grid(path, rows, n_symbols):
    logits = np.zeros((len(rows), n_symbols))
    for t, s in enumerate(rows):
        logits[t, s] = 8.0
    write_matrices(path, {"logp": log_softmax(logits, axis=1)})


def test_align_grid_mode_reports_word_spans(workdir, tmp_path):
    """The documented two-word case: pieces at frames 3 and 6 give word spans
    (1, 3) and (3, 6) that share the boundary frame."""
    vocab = PieceVocab((BLANK_SYMBOL, "a", "b"))
    vocab_path = tmp_path / "vocab.txt"
    save_vocab(vocab, vocab_path)
    grid_path = tmp_path / "grid.fdtm"
    _write_grid(grid_path, [0, 0, 1, 0, 0, 2], n_symbols=3)
    out = tmp_path / "align.tsv"
    code = main(
        [
            "align",
            "--grid", str(grid_path),
            "--vocab", str(vocab_path),
            "--word-pieces", "a b",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert "word\tgrid\t0\ta\t1\t3" in lines
    assert "word\tgrid\t1\tb\t3\t6" in lines
    refalign = [l for l in lines if l.startswith("refalign\t")][0]
    assert refalign.endswith("a@3 b@6")


def test_decode_grid_mode(workdir, tmp_path):
    vocab = PieceVocab((BLANK_SYMBOL, "a", "b"))
    vocab_path = tmp_path / "vocab.txt"
    save_vocab(vocab, vocab_path)
    grid_path = tmp_path / "grid.fdtm"
    _write_grid(grid_path, [1, 1, 0, 2], n_symbols=3)
    out = tmp_path / "dec.tsv"
    code = main(
        [
            "decode",
            "--grid", str(grid_path),
            "--vocab", str(vocab_path),
            "--beam", "8",
            "--n", "2",
            "--out", str(out),
        ]
    )
    assert code == 0
    top = out.read_text().splitlines()[0].split("\t")
    assert top[0] == "grid" and top[1] == "1"
    assert top[3] == "a b"


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["decode"])  # --out is required
    assert err.value.code == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "UsageError"


def test_config_error_exits_3(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("train:\n  learning_rate: 1\n", encoding="utf-8")
    code = main(["gen-data", "--config", str(bad), "--out", str(tmp_path / "d")])
    assert code == 3
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"] == "ConfigError"
    assert "learning_rate" in record["message"]


def test_missing_mode_arguments_exit_3(workdir, tmp_path, capsys):
    code = main(["align", "--out", str(tmp_path / "x.tsv")])
    assert code == 3
    assert json.loads(capsys.readouterr().err.strip())["error"] == "ConfigError"


def test_data_error_exits_4(workdir, tmp_path, capsys):
    code = main(
        [
            "train-ctc",
            "--config", workdir["cfg"],
            "--data", str(tmp_path / "missing"),
            "--out", str(tmp_path / "ck.fdtm"),
        ]
    )
    assert code == 4
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"] == "DataError"


def test_divergence_exits_5(workdir, tmp_path, capsys):
    cfg = tmp_path / "hot.yaml"
    cfg.write_text(
        CONFIG_YAML.replace("train:\n  epochs: 2", "train:\n  epochs: 1\n  lr: 1.0e+39"),
        encoding="utf-8",
    )
    with np.errstate(over="ignore"):
        code = main(
            [
                "train-ctc",
                "--config", str(cfg),
                "--data", workdir["data"],
                "--out", str(tmp_path / "ck.fdtm"),
            ]
        )
    assert code == 5
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "DivergenceError"


def test_seed_override_changes_dataset(workdir, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["gen-data", "--config", workdir["cfg"], "--out", str(out_a), "--seed", "5"]) == 0
    assert main(["gen-data", "--config", workdir["cfg"], "--out", str(out_b), "--seed", "5"]) == 0
    assert (out_a / "manifest_train.tsv").read_bytes() == (out_b / "manifest_train.tsv").read_bytes()
    assert (out_a / "manifest_train.tsv").read_bytes() != (
        workdir["root"] / "data" / "manifest_train.tsv"
    ).read_bytes()
