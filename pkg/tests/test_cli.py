"""End-to-end command line tests.

Every test drives main() in process and checks the exit code contract:
0 success, 2 config error, 3 data error, 4 numeric failure.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from stacklstm.cli import main
from stacklstm.train import load_checkpoint

WHILE_DOC = json.dumps(
    {
        "type": "While",
        "children": [
            {"type": "Name", "value": "x", "children": []},
            {"type": "Block", "children": []},
        ],
    }
)

# Small enough to train in seconds, big enough that every code path runs.
TINY_FLAGS = [
    "--layers", "1",
    "--hidden_size", "8",
    "--embedding_size", "8",
    "--vocab_size", "32",
    "--max_len", "48",
    "--batch_size", "4",
    "--epochs", "1",
    "--seed", "0",
]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def completion_run(workdir):
    """gen-corpus then train once; later tests reuse the checkpoint."""
    corpus = workdir / "random.jsonl"
    out_dir = workdir / "completion"
    code = main([
        "gen-corpus", "--mode", "random", "--num-examples", "12",
        "--max-depth", "3", "--max-fanout", "3", "--seed", "1",
        "--out", str(corpus),
    ])
    assert code == 0
    code = main([
        "train", "--train", str(corpus), "--valid", str(corpus),
        "--out-dir", str(out_dir), "--task", "completion",
    ] + TINY_FLAGS)
    assert code == 0
    return {"corpus": corpus, "checkpoint": out_dir / "model.ck"}


@pytest.fixture(scope="module")
def classifier_run(workdir):
    corpus = workdir / "families.jsonl"
    out_dir = workdir / "classifier"
    code = main([
        "gen-corpus", "--mode", "families", "--num-examples", "12",
        "--max-depth", "4", "--num-families", "4", "--seed", "2",
        "--out", str(corpus),
    ])
    assert code == 0
    code = main([
        "train", "--train", str(corpus), "--valid", str(corpus),
        "--out-dir", str(out_dir), "--task", "classification",
    ] + TINY_FLAGS)
    assert code == 0
    return {"corpus": corpus, "checkpoint": out_dir / "model.ck"}


def test_serialize_prints_bracket_sequence(tmp_path, capsys):
    doc = tmp_path / "while.json"
    doc.write_text(WHILE_DOC, encoding="utf-8")
    assert main(["serialize", "--input", str(doc)]) == 0
    out = capsys.readouterr().out
    assert out == "While ⟨ Name x Block ⟩\n"


def test_serialize_missing_file_exits_3(tmp_path, capsys):
    assert main(["serialize", "--input", str(tmp_path / "nope.json")]) == 3
    assert "data error:" in capsys.readouterr().err


def test_serialize_malformed_json_exits_3(tmp_path, capsys):
    doc = tmp_path / "bad.json"
    doc.write_text("{not json", encoding="utf-8")
    assert main(["serialize", "--input", str(doc)]) == 3
    assert "data error:" in capsys.readouterr().err


def test_gen_corpus_writes_one_line_per_example(tmp_path, capsys):
    out = tmp_path / "c.jsonl"
    code = main([
        "gen-corpus", "--mode", "random", "--num-examples", "7",
        "--max-depth", "3", "--out", str(out),
    ])
    assert code == 0
    assert "wrote 7 examples" in capsys.readouterr().out
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 7
    for line in lines:
        json.loads(line)


def test_train_writes_checkpoint(completion_run):
    assert completion_run["checkpoint"].exists()


def test_evaluate_reports_and_artifacts(completion_run, tmp_path, capsys):
    out_dir = tmp_path / "eval"
    code = main([
        "evaluate", "--checkpoint", str(completion_run["checkpoint"]),
        "--test", str(completion_run["corpus"]), "--out-dir", str(out_dir),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "metric: accuracy" in text
    assert "metric: mrr@10" in text

    reports = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
    names = {(r["metric"], r["slice"]) for r in reports}
    assert ("accuracy", "overall") in names
    assert ("mrr@10", "overall") in names
    for rep in reports:
        assert 0.0 <= rep["value"] <= 1.0
        assert rep["denominator"] > 0

    pred_lines = (out_dir / "predictions.txt").read_text(encoding="utf-8").splitlines()
    assert pred_lines
    for line in pred_lines:
        where, gold, ranked = line.split("\t")
        assert ":" in where
        assert gold
        assert 1 <= len(ranked.split(" ")) <= 10


def test_verify_confirms_probe(completion_run, capsys):
    code = main(["verify", "--checkpoint", str(completion_run["checkpoint"])])
    assert code == 0
    assert "bitwise identical" in capsys.readouterr().out


def test_complete_lists_topk(completion_run, tmp_path, capsys):
    doc = tmp_path / "while.json"
    doc.write_text(WHILE_DOC, encoding="utf-8")
    code = main([
        "complete", "--checkpoint", str(completion_run["checkpoint"]),
        "--input", str(doc), "--prefix-len", "3",
    ])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 10
    probs = []
    for line in lines:
        token, prob = line.split("\t")
        assert token
        probs.append(float(prob))
    # predict_topk returns ids in descending probability order
    assert probs == sorted(probs, reverse=True)


def test_complete_same_prefix_twice_is_identical(completion_run, tmp_path, capsys):
    doc = tmp_path / "while.json"
    doc.write_text(WHILE_DOC, encoding="utf-8")
    argv = [
        "complete", "--checkpoint", str(completion_run["checkpoint"]),
        "--input", str(doc),
    ]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_complete_distribution_sums_to_one(completion_run, tmp_path, capsys):
    bundle, _, _, _, _ = load_checkpoint(str(completion_run["checkpoint"]))
    vocab_size = len(bundle.vocab)
    doc = tmp_path / "while.json"
    doc.write_text(WHILE_DOC, encoding="utf-8")
    code = main([
        "complete", "--checkpoint", str(completion_run["checkpoint"]),
        "--input", str(doc), "--k", str(vocab_size),
    ])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == vocab_size
    total = sum(float(line.split("\t")[1]) for line in lines)
    # each printed value is rounded to 9 decimals, so allow half an ulp per line
    assert abs(total - 1.0) < 5e-10 * vocab_size


def test_complete_prefix_len_out_of_range_exits_2(completion_run, tmp_path, capsys):
    doc = tmp_path / "while.json"
    doc.write_text(WHILE_DOC, encoding="utf-8")
    code = main([
        "complete", "--checkpoint", str(completion_run["checkpoint"]),
        "--input", str(doc), "--prefix-len", "99",
    ])
    assert code == 2
    assert "config error:" in capsys.readouterr().err


def test_complete_rejects_classifier_checkpoint(classifier_run, tmp_path, capsys):
    doc = tmp_path / "while.json"
    doc.write_text(WHILE_DOC, encoding="utf-8")
    code = main([
        "complete", "--checkpoint", str(classifier_run["checkpoint"]),
        "--input", str(doc),
    ])
    assert code == 2
    assert "not completion" in capsys.readouterr().err


def test_classifier_evaluate_dumps_label_pairs(classifier_run, tmp_path, capsys):
    out_dir = tmp_path / "eval"
    code = main([
        "evaluate", "--checkpoint", str(classifier_run["checkpoint"]),
        "--test", str(classifier_run["corpus"]), "--out-dir", str(out_dir),
    ])
    assert code == 0
    assert "metric: accuracy" in capsys.readouterr().out
    pred_lines = (out_dir / "predictions.txt").read_text(encoding="utf-8").splitlines()
    assert len(pred_lines) == 12
    for line in pred_lines:
        gold, pred = line.split("\t")
        assert gold.startswith("family")
        assert pred.startswith("family")


def test_summarization_cli_roundtrip(workdir, capsys):
    corpus = workdir / "summ.jsonl"
    out_dir = workdir / "summarizer"
    code = main([
        "gen-corpus", "--mode", "random", "--num-examples", "8",
        "--max-depth", "3", "--with-summary", "--seed", "3",
        "--out", str(corpus),
    ])
    assert code == 0
    code = main([
        "train", "--train", str(corpus), "--valid", str(corpus),
        "--out-dir", str(out_dir), "--task", "summarization",
        "--summary_vocab_size", "32", "--summary_len", "8", "--attn_size", "8",
    ] + TINY_FLAGS)
    assert code == 0
    capsys.readouterr()
    code = main([
        "evaluate", "--checkpoint", str(out_dir / "model.ck"),
        "--test", str(corpus),
    ])
    assert code == 0
    assert "metric: bleu4" in capsys.readouterr().out


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("nonsense=3\n", encoding="utf-8")
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(WHILE_DOC + "\n", encoding="utf-8")
    code = main([
        "train", "--train", str(corpus), "--valid", str(corpus),
        "--config", str(cfg),
    ])
    assert code == 2
    assert "config error:" in capsys.readouterr().err


def test_train_missing_corpus_exits_3(tmp_path, capsys):
    code = main([
        "train", "--train", str(tmp_path / "absent.jsonl"),
        "--valid", str(tmp_path / "absent.jsonl"),
    ])
    assert code == 3
    assert "data error:" in capsys.readouterr().err


def test_numeric_blowup_exits_4(completion_run, tmp_path, capsys):
    with np.errstate(all="ignore"):
        code = main([
            "train", "--train", str(completion_run["corpus"]),
            "--valid", str(completion_run["corpus"]),
            "--out-dir", str(tmp_path),
            "--learning_rate", "1e200",
        ] + TINY_FLAGS)
    assert code == 4
    assert "numeric failure:" in capsys.readouterr().err


def test_ngram_cli_reports(completion_run, capsys):
    code = main([
        "ngram", "--n", "2",
        "--train", str(completion_run["corpus"]),
        "--test", str(completion_run["corpus"]),
        "--vocab_size", "32", "--max_len", "48",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "metric: accuracy" in out
    assert "metric: mrr@10" in out


def test_module_entrypoint_runs(tmp_path):
    doc = tmp_path / "while.json"
    doc.write_text(WHILE_DOC, encoding="utf-8")
    proc = subprocess.run(
        [sys.executable, "-m", "stacklstm.cli", "serialize", "--input", str(doc)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip().startswith("While")
