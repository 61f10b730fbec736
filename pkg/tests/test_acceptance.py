"""Acceptance gate: nine end-to-end checks of the model and its pipelines.

Each check records one PASS/FAIL line; conftest.py prints the scoreboard
after the run summary so it survives output capture. The heavyweight
checks (6 and 7) train real models and dominate the runtime; the whole
file takes a few minutes.
"""

import functools
import math
import time

import numpy as np
import pytest

from stacklstm import tensor as T
from stacklstm.config import default_config
from stacklstm.gradcheck import finite_difference_check
from stacklstm.metrics import bleu4, mrr_at_10
from stacklstm.model import StackLSTM
from stacklstm.rng import Rng
from stacklstm.synthetic import GeneratorSpec, generate_synthetic_corpus
from stacklstm.train import (
    _summary_rows,
    compare_alphas,
    encode_corpus,
    encode_summaries,
    evaluate,
    summary_token_lists,
    train,
    verify_checkpoint,
)
from stacklstm.trees import AstNode, Example, deserialize_sequence, serialize_ast
from stacklstm.vocab import KIND_CODES, EncodedSequence


RESULTS = []


def criterion(num, title):
    """Record one scoreboard line per check; conftest prints them all."""

    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                RESULTS.append((num, "FAIL", title, time.perf_counter() - start))
                raise
            RESULTS.append((num, "PASS", title, time.perf_counter() - start))

        return wrapper

    return decorate


def _encode(tokens, kinds):
    codes = np.array([KIND_CODES[k] for k in kinds], dtype=np.int64)
    ids = np.array(tokens, dtype=np.int64)
    return EncodedSequence(ids, codes, len(tokens))


def _depth3_sequence():
    """20 tokens, balanced, nesting depth exactly 3, every id distinct."""
    kinds = ["NT", "OPEN", "NT", "OPEN", "NT", "OPEN", "NT", "T", "CLOSE", "NT",
             "CLOSE", "NT", "OPEN", "T", "CLOSE", "NT", "CLOSE", "NT", "T", "NT"]
    ids = []
    nxt = 4
    for k in kinds:
        if k == "OPEN":
            ids.append(2)
        elif k == "CLOSE":
            ids.append(3)
        else:
            ids.append(nxt)
            nxt += 1
    depth = peak = 0
    for k in kinds:
        depth += {"OPEN": 1, "CLOSE": -1}.get(k, 0)
        peak = max(peak, depth)
    assert len(kinds) == 20 and depth == 0 and peak == 3
    return _encode(ids, kinds), nxt


@criterion(1, "analytic gradients match finite differences for every alpha")
def test_criterion_1_gradient_fidelity():
    enc, vocab_size = _depth3_sequence()
    start = time.perf_counter()
    for alpha in ("fc", "maxpool", "summarization"):
        model = StackLSTM(vocab_size, 8, embedding_size=8, layers=2,
                          alpha=alpha, seed=3)

        def loss_fn():
            trace = model.run_sequence(enc, mode="strict")
            total = None
            for h in trace.h[-1]:
                term = T.sum_all(T.mul(h, h))
                total = term if total is None else T.add(total, term)
            return total

        report = finite_difference_check(loss_fn, model.parameters(), eps=1e-5)
        assert report.passed(1e-4), "%s: %s" % (alpha, report.summary())
    assert time.perf_counter() - start < 120.0


@criterion(2, "stack model equals a plain LSTM on bracket-free input")
def test_criterion_2_vanilla_degeneration():
    rng = Rng(99)
    n = 40
    ids = np.array([4 + rng.randint(8) for _ in range(n)], dtype=np.int64)
    kinds = ["NT" if rng.randint(2) else "T" for _ in range(n)]
    enc = _encode(ids, kinds)
    for alpha in ("fc", "maxpool", "summarization"):
        stacked = StackLSTM(16, 8, layers=2, alpha=alpha, seed=7)
        plain = StackLSTM(16, 8, layers=2, alpha=alpha, vanilla=True, seed=7)
        t1 = stacked.run_sequence(enc, mode="strict")
        t2 = plain.run_sequence(enc, mode="strict")
        for layer in range(2):
            for a, b in zip(t1.h[layer], t2.h[layer]):
                assert np.max(np.abs(a.data - b.data)) <= 1e-12
            for a, b in zip(t1.c[layer], t2.c[layer]):
                assert np.max(np.abs(a.data - b.data)) <= 1e-12


@criterion(3, "loss after a 100-token block reaches the pushed state")
def test_criterion_3_gradient_shortcut():
    filler = 100
    kinds = ["NT", "OPEN"] + ["NT"] * filler + ["CLOSE", "NT"]
    ids = [4, 2] + [5] * filler + [3, 6]
    enc = _encode(ids, kinds)
    model = StackLSTM(8, 12, layers=2, alpha="summarization", seed=1)
    with T.Tape() as tape:
        trace = model.run_sequence(enc, mode="strict")
        last = trace.h[-1][trace.length - 1]
        loss = T.sum_all(T.mul(last, last))
        # the states saved when the block opened: layer h at the step
        # before OPEN, which the stacks replay at the matching CLOSE
        pushed = [trace.h[layer][0] for layer in range(2)]
        grads = tape.backward(loss, wrt=pushed)
    for p in pushed:
        norm = float(np.sqrt(np.sum(grads[p] ** 2)))
        assert norm > 1e-8, "gradient through the stack vanished: %g" % norm


@criterion(4, "canonical while-loop serialization and 1000 exact round-trips")
def test_criterion_4_serialization():
    start = time.perf_counter()
    tree = AstNode("Module", None, [
        AstNode("While", None, [
            AstNode("Compare", None, [
                AstNode("Name('i')"), AstNode("Lt"), AstNode("Num"),
            ]),
            AstNode("Expr", None, [
                AstNode("Call", None, [
                    AstNode("Name('print')"), AstNode("Name('i')"),
                ]),
            ]),
        ]),
    ])
    expected = ("Module ⟨ While ⟨ Compare ⟨ Name('i') Lt Num ⟩ "
                "Expr ⟨ Call ⟨ Name('print') Name('i') ⟩ ⟩ "
                "⟩ ⟩").split(" ")
    assert serialize_ast(tree).tokens == expected

    spec = GeneratorSpec(mode="random", num_examples=1000, max_depth=5, max_fanout=4)
    for ex in generate_synthetic_corpus(spec, seed=23):
        seq = serialize_ast(ex.tree)
        depth = 0
        for kind in seq.kinds:
            if kind == "OPEN":
                depth += 1
            elif kind == "CLOSE":
                depth -= 1
            assert depth >= 0
        assert depth == 0
        assert deserialize_sequence(seq) == ex.tree
    assert time.perf_counter() - start < 10.0


@criterion(5, "rank and overlap metrics reproduce hand-computed values")
def test_criterion_5_metric_oracles():
    ranked = [
        [7] + list(range(10, 19)),        # gold first
        [10, 11, 7] + list(range(12, 19)),  # gold third
        list(range(10, 20)),              # gold outside the top ten
    ]
    assert mrr_at_10([ranked[0]], [7]).value == 1.0
    assert mrr_at_10([ranked[1]], [7]).value == 1.0 / 3.0
    assert mrr_at_10([ranked[2]], [7]).value == 0.0

    sent = ["the", "cat", "sat", "on", "the", "mat"]
    assert bleu4([sent], [sent]).value == pytest.approx(1.0, abs=1e-12)

    rep = bleu4([["the", "the", "the"]], [["the", "cat"]])
    assert rep.value == pytest.approx((1.0 / 18.0) ** 0.25, abs=1e-9)

    # longer candidate: no brevity penalty; p1=2/3, p2=1/2, p3 smoothed 1/2
    assert bleu4([["a", "b", "c"]], [["a", "b"]]).value == pytest.approx(
        ((2.0 / 3.0) * (1.0 / 2.0) * (1.0 / 2.0) * 1.0) ** 0.25, abs=1e-9)
    # shorter candidate: exp(1 - reflen/candlen)
    assert bleu4([["a", "b"]], [["a", "b", "c", "d"]]).value == pytest.approx(
        math.exp(1.0 - 4.0 / 2.0), abs=1e-9)


def _idiom_program(i):
    """Program i: a unique id leaf, then one call statement repeated."""
    k = i % 12
    reps = 4 + (k % 5)
    stmt = AstNode("Call", None, [
        AstNode("Name", "fn_%d" % k),
        AstNode("Name", "arg_%d" % (k % 7)),
    ])
    return Example(AstNode("Main", None, [
        AstNode("Id", "prog_%03d" % i),
        AstNode("Loop", None, [stmt] * reps),
    ]))


@criterion(6, "training pipelines overfit small corpora on all three tasks")
def test_criterion_6_overfit_sanity():
    start = time.perf_counter()

    # next-token completion: 200 programs, >=95% train accuracy in <=50 epochs
    corpus = [_idiom_program(i) for i in range(200)]
    cfg = default_config("completion")
    cfg.layers = 2
    cfg.hidden_size = cfg.embedding_size = 64
    cfg.vocab_size = 256
    cfg.max_len = max(len(serialize_ast(ex.tree)) for ex in corpus)
    cfg.batch_size = 4
    cfg.epochs = 50
    cfg.learning_rate = 5e-3
    cfg.seed = 0
    res = train(cfg, corpus, corpus, target_metric=0.95)
    assert len(res.history) <= 50
    assert res.best_metric >= 0.95, "completion stalled at %.4f" % res.best_metric
    assert time.perf_counter() - start < 900.0

    # four-way nesting-pattern classification, >=95% train accuracy
    spec = GeneratorSpec(mode="families", num_examples=80, num_families=4,
                         family_depth=3, max_depth=4, max_fanout=3)
    fam = generate_synthetic_corpus(spec, seed=11)
    cfg = default_config("classification")
    cfg.layers = 1
    cfg.hidden_size = cfg.embedding_size = 32
    cfg.vocab_size = 64
    cfg.max_len = max(len(serialize_ast(ex.tree)) for ex in fam)
    cfg.batch_size = 8
    cfg.epochs = 15
    cfg.learning_rate = 5e-3
    res = train(cfg, fam, fam, target_metric=0.95)
    assert res.best_metric >= 0.95, "classification stalled at %.4f" % res.best_metric

    # 20-pair summarization: greedy decode reproduces every reference
    spec = GeneratorSpec(mode="random", num_examples=20, max_depth=3,
                         max_fanout=3, with_summary=True)
    pairs = generate_synthetic_corpus(spec, seed=13)
    cfg = default_config("summarization")
    cfg.layers = 1
    cfg.hidden_size = cfg.embedding_size = 48
    cfg.attn_size = 24
    cfg.vocab_size = 64
    cfg.summary_vocab_size = 32
    cfg.summary_len = 10
    cfg.max_len = max(len(serialize_ast(ex.tree)) for ex in pairs)
    cfg.batch_size = 4
    cfg.epochs = 150
    cfg.learning_rate = 5e-3
    res = train(cfg, pairs, pairs, target_metric=1.0)
    bundle = res.bundle
    encs = encode_corpus(pairs, bundle.vocab, cfg.max_len)
    refs = encode_summaries(
        summary_token_lists(pairs), bundle.summary_vocab, cfg.summary_len)
    hyps, wanted = _summary_rows(bundle, encs, refs)
    misses = sum(1 for h, r in zip(hyps, wanted) if h != r)
    assert misses == 0, "%d of 20 summaries not reproduced" % misses


@criterion(7, "stack beats the no-stack flag by >=5 points at length 400")
def test_criterion_7_directional_superiority():
    start = time.perf_counter()
    spec = GeneratorSpec(mode="long_range", num_examples=64, num_families=4,
                         filler_len=388, max_depth=3)
    corpus = generate_synthetic_corpus(spec, seed=17)
    assert all(len(serialize_ast(ex.tree)) == 400 for ex in corpus)
    train_set, valid_set = corpus[:48], corpus[48:]

    medians = {}
    for vanilla in (0, 1):
        accs = []
        for seed in (0, 1, 2):
            cfg = default_config("classification")
            cfg.layers = 1
            cfg.hidden_size = cfg.embedding_size = 32
            cfg.vocab_size = 32
            cfg.max_len = 400
            cfg.batch_size = 4
            cfg.epochs = 12
            cfg.learning_rate = 5e-3
            cfg.seed = seed
            cfg.vanilla = vanilla
            accs.append(train(cfg, train_set, valid_set).best_metric)
        medians[vanilla] = sorted(accs)[1]

    gap = medians[0] - medians[1]
    assert gap >= 0.05, (
        "stack median %.4f vs plain median %.4f, gap %.4f"
        % (medians[0], medians[1], gap))
    assert time.perf_counter() - start < 1800.0


@criterion(8, "all three alpha variants train under one switch and get ranked")
def test_criterion_8_alpha_comparison(tmp_path):
    corpus = [_idiom_program(i) for i in range(24)]
    cfg = default_config("completion")
    cfg.layers = 1
    cfg.hidden_size = cfg.embedding_size = 16
    cfg.vocab_size = 64
    cfg.max_len = max(len(serialize_ast(ex.tree)) for ex in corpus)
    cfg.batch_size = 8
    cfg.epochs = 2
    cfg.learning_rate = 3e-3
    results = compare_alphas(cfg, corpus, corpus)
    assert sorted(r["alpha"] for r in results) == ["fc", "maxpool", "summarization"]
    metrics = [r["best_metric"] for r in results]
    assert metrics == sorted(metrics, reverse=True)
    for r in results:
        assert r["history"], "run for %s produced no epochs" % r["alpha"]


@criterion(9, "same-seed reruns and checkpoints are bitwise identical")
def test_criterion_9_determinism_and_checkpoints(tmp_path):
    corpus = [_idiom_program(i) for i in range(16)]
    cfg = default_config("completion")
    cfg.layers = 1
    cfg.hidden_size = cfg.embedding_size = 16
    cfg.vocab_size = 64
    cfg.max_len = max(len(serialize_ast(ex.tree)) for ex in corpus)
    cfg.batch_size = 4
    cfg.epochs = 3
    cfg.learning_rate = 3e-3

    runs = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        res = train(cfg, corpus, corpus, out_dir=str(out))
        reports, dump = evaluate(res.bundle, corpus)
        runs.append({
            "history": res.history,
            "bytes": (out / "model.ck").read_bytes(),
            "reports": [r.to_dict() for r in reports],
            "dump": dump,
        })

    assert runs[0]["history"] == runs[1]["history"]
    assert runs[0]["bytes"] == runs[1]["bytes"]
    assert runs[0]["reports"] == runs[1]["reports"]
    assert runs[0]["dump"] == runs[1]["dump"]

    probe = verify_checkpoint(str(tmp_path / "one" / "model.ck"))
    assert probe["bitwise_equal"], probe["first_divergence"]
