"""Metric oracles: accuracy slices, MRR@10, BLEU-4, n-gram baseline."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stacklstm.errors import ConfigError, ContractError
from stacklstm.metrics import EvalReport, accuracy, bleu4, mrr_at_10, render_json, render_text
from stacklstm.ngram import NgramModel
from stacklstm.rng import Rng


def test_accuracy_basic_values():
    assert accuracy([1, 2, 3], [1, 2, 3]).value == 1.0
    rep = accuracy(["a", "b", "c"], ["a", "x", "c"])
    assert rep.value == pytest.approx(2 / 3)
    assert (rep.numerator, rep.denominator) == (2, 3)


def test_accuracy_slice_mask():
    preds = np.array([1, 2, 3, 4])
    golds = np.array([1, 0, 3, 0])
    rep = accuracy(preds, golds, mask=[True, True, False, False], slice_tag="NT")
    assert rep.value == 0.5
    assert rep.slice == "NT"


def test_accuracy_matches_counting_oracle():
    rng = Rng(3)
    preds = rng.uniform_array((200,), 0, 5).astype(int)
    golds = rng.uniform_array((200,), 0, 5).astype(int)
    mask = rng.uniform_array((200,)) > 0.4
    rep = accuracy(preds, golds, mask=mask)
    correct = sum(1 for p, g, m in zip(preds, golds, mask) if m and p == g)
    assert rep.numerator == correct
    assert rep.denominator == int(mask.sum())
    assert rep.value == correct / int(mask.sum())


def test_accuracy_contract_errors():
    with pytest.raises(ContractError):
        accuracy([1, 2], [1])
    with pytest.raises(ContractError):
        accuracy([1, 2], [1, 2], mask=[False, False])


def test_mrr_reference_values():
    assert mrr_at_10([[5, 1, 2]], [5]).value == 1.0
    assert mrr_at_10([[9, 8, 5]], [5]).value == pytest.approx(1 / 3)
    ranked = [list(range(20))]
    assert mrr_at_10(ranked, [10]).value == 0.0   # rank 11 is out of the window
    assert mrr_at_10(ranked, [9]).value == pytest.approx(1 / 10)
    mixed = mrr_at_10([[1, 2], [3, 4], [9]], [2, 3, 0])
    assert mixed.value == pytest.approx((0.5 + 1.0 + 0.0) / 3)


def test_mrr_contract_errors():
    with pytest.raises(ContractError):
        mrr_at_10([], [])
    with pytest.raises(ContractError):
        mrr_at_10([[]], [1])
    with pytest.raises(ContractError):
        mrr_at_10([[1]], [1, 2])


@given(st.lists(st.integers(0, 30), min_size=1, max_size=40), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_mrr_never_below_top1_accuracy(golds, seed):
    rng = Rng(seed)
    ranked = []
    for _ in golds:
        perm = rng.permutation(31)
        ranked.append([int(x) for x in perm[:10]])
    top1 = [r[0] for r in ranked]
    acc = accuracy(top1, golds)
    mrr = mrr_at_10(ranked, golds)
    assert mrr.value >= acc.value - 1e-12


def test_bleu_identity_is_one():
    rep = bleu4([["a", "b", "c", "d", "e"]], [["a", "b", "c", "d", "e"]])
    assert rep.value == pytest.approx(1.0, abs=1e-12)
    assert (rep.numerator, rep.denominator) == (5, 5)


def test_bleu_hand_computed_smoothed_case():
    # Unigram precision 1/3 after clipping; bigram 0 -> smoothed 1/3;
    # trigram 0 -> smoothed 1/2; no 4-grams -> smoothed 1/1.  Candidate is
    # longer than the reference, so no brevity penalty applies.
    rep = bleu4([["the", "the", "the"]], [["the", "cat"]])
    want = (1 / 18) ** 0.25
    assert abs(rep.value - want) < 1e-9


def test_bleu_brevity_penalty_branches():
    # Longer candidate: BP is exactly 1.
    long = bleu4([["a", "b", "c", "d", "e", "f"]], [["a", "b", "c", "d"]])
    p1 = 4 / 6
    p2 = 3 / 5
    p3 = 2 / 4
    p4 = 1 / 3
    assert long.value == pytest.approx((p1 * p2 * p3 * p4) ** 0.25)
    # Shorter candidate: BP = exp(1 - r/c).
    short = bleu4([["a", "b", "c"]], [["a", "b", "c", "d", "e", "f"]])
    bp = math.exp(1 - 6 / 3)
    assert short.value == pytest.approx(bp * ((3 / 3) * (2 / 2) * (1 / 1) * (1 / 1)) ** 0.25)
    # Equal lengths: both branches agree at exp(0).
    eq = bleu4([["a", "b", "c", "d"]], [["a", "b", "c", "d"]])
    assert eq.value == pytest.approx(1.0, abs=1e-12)


def test_bleu_permutation_invariant():
    cands = [["a", "b"], ["c", "c", "d"], ["e"]]
    refs = [["a", "b"], ["c", "d", "d"], ["f"]]
    forward = bleu4(cands, refs).value
    backward = bleu4(cands[::-1], refs[::-1]).value
    assert forward == backward


def test_bleu_contract_errors():
    with pytest.raises(ContractError):
        bleu4([], [])
    with pytest.raises(ContractError):
        bleu4([["a"]], [])
    with pytest.raises(ContractError):
        bleu4([[]], [["a"]])
    with pytest.raises(ContractError):
        bleu4([["a"]], [[]])


def test_report_rendering():
    reps = [
        accuracy([1, 2], [1, 2], slice_tag="NT"),
        mrr_at_10([[1]], [1]),
    ]
    text = render_text(reps)
    assert "metric: accuracy" in text
    assert "slice: NT" in text
    assert "value: 1.0" in text
    parsed = json.loads(render_json(reps))
    assert parsed[0]["metric"] == "accuracy"
    assert set(parsed[0]) == {"metric", "slice", "value", "numerator", "denominator"}


def test_report_denominator_contract():
    with pytest.raises(ContractError):
        EvalReport("accuracy", "overall", 0.0, 0, 0)


def test_ngram_unigram_predicts_most_frequent():
    model = NgramModel(1).fit([[4, 4, 4, 5, 5, 6]])
    assert model.predict_topk([], 3) == [4, 5, 6]
    assert model.predict_topk([9, 9], 1) == [4]   # context is ignored at n=1


def test_ngram_deterministic_bigram_corpus_is_perfect():
    seqs = [[4, 5, 6, 7], [8, 5, 6, 7]]
    model = NgramModel(2).fit(seqs)
    hits = 0
    total = 0
    for seq in seqs:
        for t in range(1, len(seq)):
            total += 1
            if model.predict_topk(seq[:t], 1)[0] == seq[t]:
                hits += 1
    # Every bigram context has a unique continuation in this corpus.
    assert hits == total


def test_ngram_counts_match_bruteforce():
    rng = Rng(12)
    seqs = [[int(rng.randint(6)) for _ in range(20)] for _ in range(8)]
    model = NgramModel(3).fit(seqs)
    brute = {}
    for seq in seqs:
        for t in range(len(seq)):
            for m in range(min(2, t) + 1):
                key = (m, tuple(seq[t - m : t]))
                brute.setdefault(key, {}).setdefault(seq[t], 0)
                brute[(m, tuple(seq[t - m : t]))][seq[t]] += 1
    for (m, ctx), wants in brute.items():
        got = model.counts[m][ctx]
        assert dict(got) == wants


def test_ngram_backoff_and_padding():
    model = NgramModel(3).fit([[4, 5, 6], [4, 5, 7], [8, 6, 9]], vocab_size=12)
    # Unseen trigram context backs off to the bigram table.
    assert model.predict_topk([9, 5], 2) == [6, 7]
    # Fully unseen context falls back to unigram frequencies.
    ranked = model.predict_topk([11, 11], 4)
    assert ranked[0] == 4   # most frequent overall (appears twice... ties to lower)
    assert len(ranked) == len(set(ranked)) == 4
    # Padding reaches unseen ids in ascending order.
    full = model.predict_topk([4, 5], model.vocab_size)
    assert sorted(full) == list(range(12))
    assert full[0] in (6, 7)


def test_ngram_contract_errors():
    with pytest.raises(ConfigError):
        NgramModel(0)
    with pytest.raises(ContractError):
        NgramModel(2).fit([])
    with pytest.raises(ContractError):
        NgramModel(2).fit([[]])
    model = NgramModel(2).fit([[1, 2]])
    with pytest.raises(ContractError):
        model.predict_topk([1], 0)
    with pytest.raises(ContractError):
        model.predict_topk([1], 99)
    with pytest.raises(ContractError):
        NgramModel(1).fit([[5]], vocab_size=3)
    with pytest.raises(ContractError):
        NgramModel(2).predict_topk([1], 1)
