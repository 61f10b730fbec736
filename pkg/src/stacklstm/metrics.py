"""Evaluation metrics: sliced accuracy, MRR with a top-10 cutoff, BLEU-4.

Every metric returns an EvalReport carrying the raw counts next to the
value, and the report set can be rendered as a flat text block or JSON.
"""

import json
import math
from collections import Counter

import numpy as np

from .errors import ContractError


class EvalReport:
    """One metric value with its counts and the slice it was computed on."""

    __slots__ = ("metric", "slice", "value", "numerator", "denominator")

    def __init__(self, metric, slice_tag, value, numerator, denominator):
        if denominator <= 0:
            raise ContractError("%s/%s: denominator must be positive" % (metric, slice_tag))
        self.metric = metric
        self.slice = slice_tag
        self.value = float(value)
        self.numerator = numerator
        self.denominator = denominator

    def to_dict(self):
        return {
            "metric": self.metric,
            "slice": self.slice,
            "value": self.value,
            "numerator": self.numerator,
            "denominator": self.denominator,
        }

    def __repr__(self):
        return "EvalReport(%s/%s=%.6f, %s/%s)" % (
            self.metric,
            self.slice,
            self.value,
            self.numerator,
            self.denominator,
        )


def accuracy(predictions, golds, mask=None, slice_tag="overall", metric="accuracy"):
    """Fraction of positions where prediction equals gold, over the mask."""
    predictions = np.asarray(predictions)
    golds = np.asarray(golds)
    if predictions.shape != golds.shape or predictions.ndim != 1:
        raise ContractError(
            "accuracy: predictions %s and golds %s must be equal-length vectors"
            % (predictions.shape, golds.shape)
        )
    if mask is None:
        mask = np.ones(predictions.shape[0], dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != predictions.shape:
            raise ContractError("accuracy: mask shape %s does not match" % (mask.shape,))
    total = int(mask.sum())
    if total == 0:
        raise ContractError("accuracy: slice %r selects no positions" % slice_tag)
    correct = int(np.count_nonzero((predictions == golds) & mask))
    return EvalReport(metric, slice_tag, correct / total, correct, total)


def mrr_at_10(ranked_lists, golds, slice_tag="overall", metric="mrr@10"):
    """Mean reciprocal rank of the gold inside each top-10 list, else 0."""
    if len(ranked_lists) != len(golds):
        raise ContractError(
            "mrr: %d ranked lists vs %d golds" % (len(ranked_lists), len(golds))
        )
    if len(golds) == 0:
        raise ContractError("mrr: empty query set")
    # Ranks only take the values 1..10, so tally them and sum the
    # reciprocals in a fixed order; the result is exactly independent of
    # the query order.
    rank_counts = [0] * 10
    for ranked, gold in zip(ranked_lists, golds):
        if len(ranked) == 0:
            raise ContractError("mrr: a ranked list is empty")
        top = list(ranked)[:10]
        if gold in top:
            rank_counts[top.index(gold)] += 1
    total = sum(count / (rank + 1) for rank, count in enumerate(rank_counts))
    return EvalReport(metric, slice_tag, total / len(golds), total, len(golds))


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidates, references, slice_tag="overall", metric="bleu4"):
    """Corpus-level BLEU with 4 uniformly weighted n-gram orders.

    Precision counts are clipped against the reference; an order whose
    numerator is zero gets one smoothing count added to both sides.  The
    brevity penalty is 1 when the candidate corpus is longer than the
    reference corpus and exp(1 - r/c) otherwise.  The report carries the
    corpus lengths (candidate/reference) as its counts.
    """
    if len(candidates) == 0:
        raise ContractError("bleu: empty candidate set")
    if len(candidates) != len(references):
        raise ContractError(
            "bleu: %d candidates vs %d references" % (len(candidates), len(references))
        )
    cand_len = sum(len(c) for c in candidates)
    ref_len = sum(len(r) for r in references)
    if cand_len == 0:
        raise ContractError("bleu: all candidates are empty")
    if ref_len == 0:
        raise ContractError("bleu: all references are empty")
    log_sum = 0.0
    for n in range(1, 5):
        matched = 0
        total = 0
        for cand, ref in zip(candidates, references):
            cand_counts = _ngram_counts(list(cand), n)
            ref_counts = _ngram_counts(list(ref), n)
            total += max(len(cand) - n + 1, 0)
            for gram, count in cand_counts.items():
                matched += min(count, ref_counts.get(gram, 0))
        if matched == 0:
            matched += 1
            total += 1
        log_sum += 0.25 * math.log(matched / total)
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return EvalReport(metric, slice_tag, bp * math.exp(log_sum), cand_len, ref_len)


def render_text(reports):
    """Flat key-value block, one stanza per report."""
    blocks = []
    for rep in reports:
        d = rep.to_dict()
        blocks.append(
            "\n".join("%s: %s" % (key, d[key]) for key in
                      ("metric", "slice", "value", "numerator", "denominator"))
        )
    return "\n\n".join(blocks) + "\n"


def render_json(reports):
    return json.dumps([rep.to_dict() for rep in reports], indent=2, sort_keys=True) + "\n"
