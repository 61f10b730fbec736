"""Task heads on top of the encoder: completion, classification, summarization.

Completion projects every hidden state onto the token vocabulary and scores
the next token.  Classification projects the final hidden state onto a fixed
label set.  Summarization runs a separate decoder LSTM whose input at each
step is the previous summary token plus an additive-attention context over
the encoder states.
"""

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError
from .model import LstmLayerParams, init_bias, init_matrix, lstm_step
from .tensor import Tensor
from .vocab import CLOSE_ID, KIND_CODES, OPEN_ID

_PAD_CODE = KIND_CODES["PAD"]

# Summaries are encoded with the same reserved rows as code sequences; the
# bracket rows never occur inside summary text, so they double as the
# start-of-summary and end-of-summary markers.
SUMMARY_START = OPEN_ID
SUMMARY_END = CLOSE_ID


class CompletionHead:
    """Projection from hidden states to next-token logits."""

    def __init__(self, vocab_size, hidden_size, rng, prefix="completion"):
        if vocab_size < 1 or hidden_size < 1:
            raise ConfigError("completion head sizes must be positive")
        self.vocab_size = vocab_size
        self.hidden_size = hidden_size
        self.W = init_matrix(rng, vocab_size, hidden_size, prefix + ".W")
        self.b = init_bias(vocab_size, prefix + ".b")

    def logits(self, h):
        return T.add_rowvec(T.matmul(h, self.W, tb=True), self.b)

    def parameters(self):
        return [self.W, self.b]


def completion_forward(trace, head):
    """Logits for every next-token position of one sequence.

    Row t scores token t+1, so a length-L trace yields L-1 rows.
    """
    if trace.length < 2:
        raise ContractError("completion needs at least two tokens, got %d" % trace.length)
    states = T.concat_rows([trace.h[-1][t] for t in range(trace.length - 1)])
    return head.logits(states)


def completion_loss(head, batch):
    """Mean next-token cross-entropy over a batch, PAD targets masked out.

    Returns (loss, count) where count is the number of scored positions.
    """
    width = batch.length
    if width < 2:
        raise ContractError("completion needs at least two tokens per batch")
    states = T.concat_rows(batch.h_top[: width - 1])
    logits = head.logits(states)
    # Row t*B + b predicts example b's token at position t+1; columns past
    # the longest real length are all PAD and are never scored.
    targets = np.ascontiguousarray(batch.ids[:, 1:width].T.reshape(-1))
    keep = (batch.kinds[:, 1:width].T.reshape(-1) != _PAD_CODE).astype(np.float64)
    count = int(keep.sum())
    if count == 0:
        raise ContractError("completion batch has no non-PAD targets")
    losses = T.softmax_xent(logits, targets)
    mask = Tensor(keep.reshape(-1, 1), requires_grad=False)
    loss = T.scale(T.sum_all(T.mul(losses, mask)), 1.0 / count)
    return loss, count


def predict_topk(logits, k):
    """Top-k token ids by score, ties broken toward the lower id."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
    data = data.reshape(-1)
    if not 1 <= k <= data.shape[0]:
        raise ContractError("k=%d out of range for %d tokens" % (k, data.shape[0]))
    order = np.argsort(-data, kind="stable")
    return [int(i) for i in order[:k]]


class ClassifierHead:
    """Projection from the final hidden state to class logits."""

    def __init__(self, num_classes, hidden_size, rng, prefix="classifier"):
        if num_classes < 2:
            raise ConfigError("classifier needs at least two classes")
        self.num_classes = num_classes
        self.hidden_size = hidden_size
        self.W = init_matrix(rng, num_classes, hidden_size, prefix + ".W")
        self.b = init_bias(num_classes, prefix + ".b")

    def logits(self, h):
        return T.add_rowvec(T.matmul(h, self.W, tb=True), self.b)

    def parameters(self):
        return [self.W, self.b]


def classify_program(trace, head):
    """Class distribution for one sequence from its last real hidden state."""
    if trace.length == 0:
        raise ContractError("cannot classify an empty trace")
    return T.softmax_rows(head.logits(trace.final_hidden()))


def argmax_class(dist):
    """Predicted class index; ties go to the lowest index."""
    data = dist.data if isinstance(dist, Tensor) else np.asarray(dist)
    return int(np.argmax(data.reshape(-1)))


def classification_loss(head, batch, labels):
    """Mean cross-entropy over a batch of final hidden states.

    Returns (loss, logits) so callers can also score predictions.
    """
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    num = batch.ids.shape[0]
    if labels.shape != (num,):
        raise ContractError("expected %d labels, got shape %s" % (num, labels.shape))
    if np.any(batch.lengths < 1):
        raise ContractError("cannot classify an empty trace")
    if labels.min() < 0 or labels.max() >= head.num_classes:
        raise ContractError("label out of range for %d classes" % head.num_classes)
    rows = [T.take_row(batch.h_top[int(batch.lengths[b]) - 1], b) for b in range(num)]
    logits = head.logits(T.concat_rows(rows))
    loss = T.mean_all(T.softmax_xent(logits, labels))
    return loss, logits


class AttentionDecoder:
    """Decoder LSTM with additive attention over encoder states.

    At each step the previous summary token's embedding is concatenated
    with the attention context and fed to the decoder cell; the new state
    is projected onto the summary vocabulary.
    """

    def __init__(
        self,
        summary_vocab_size,
        enc_hidden_size,
        dec_hidden_size,
        embedding_size,
        attn_size,
        rng,
        prefix="decoder",
    ):
        if min(summary_vocab_size, enc_hidden_size, dec_hidden_size, embedding_size, attn_size) < 1:
            raise ConfigError("decoder sizes must be positive")
        self.summary_vocab_size = summary_vocab_size
        self.enc_hidden_size = enc_hidden_size
        self.dec_hidden_size = dec_hidden_size
        self.embedding_size = embedding_size
        self.attn_size = attn_size
        self.embed = init_matrix(rng, summary_vocab_size, embedding_size, prefix + ".embed")
        self.cell = LstmLayerParams(
            embedding_size + enc_hidden_size, dec_hidden_size, rng, prefix + ".lstm"
        )
        self.W_q = init_matrix(rng, attn_size, dec_hidden_size, prefix + ".attn_Wq")
        self.W_k = init_matrix(rng, attn_size, enc_hidden_size, prefix + ".attn_Wk")
        self.v = init_matrix(rng, 1, attn_size, prefix + ".attn_v")
        self.out_W = init_matrix(rng, summary_vocab_size, dec_hidden_size, prefix + ".out_W")
        self.out_b = init_bias(summary_vocab_size, prefix + ".out_b")

    def parameters(self):
        return [self.embed] + self.cell.tensors() + [
            self.W_q,
            self.W_k,
            self.v,
            self.out_W,
            self.out_b,
        ]


def encoder_matrix(trace):
    """Stack a trace's top-layer states into one (length, hidden) matrix."""
    if trace.length == 0:
        raise ContractError("encoder trace is empty")
    return T.concat_rows([trace.h[-1][t] for t in range(trace.length)])


def attention_context(decoder, state, enc, mask=None):
    """Additive attention: scores v'tanh(Wq s + Wk h_j), softmax, weighted sum.

    Returns (context, weights); weights has one row over encoder positions.
    """
    positions = enc.shape[0]
    if positions == 0:
        raise ContractError("attention needs at least one encoder position")
    if mask is not None:
        mask = np.ascontiguousarray(mask, dtype=np.float64).reshape(1, positions)
        if mask.sum() == 0.0:
            raise ContractError("attention mask excludes every encoder position")
    keys = T.matmul(enc, decoder.W_k, tb=True)
    query = T.reshape(T.matmul(state, decoder.W_q, tb=True), (decoder.attn_size,))
    scores = T.matmul(T.tanh(T.add_rowvec(keys, query)), decoder.v, tb=True)
    weights = T.softmax_rows(T.reshape(scores, (1, positions)), mask=mask)
    context = T.matmul(weights, enc)
    return context, weights


def _decode_step(decoder, prev_id, state, cell, enc, mask):
    context, weights = attention_context(decoder, state, enc, mask)
    x = T.concat_cols(T.take_row(decoder.embed, prev_id), context)
    state, cell = lstm_step(x, state, cell, decoder.cell)
    logits = T.add_rowvec(T.matmul(state, decoder.out_W, tb=True), decoder.out_b)
    return logits, state, cell, weights


class SummaryResult:
    """Decoded token ids plus the teacher-forced loss when one was computed."""

    __slots__ = ("tokens", "loss", "attention")

    def __init__(self, tokens, loss, attention):
        self.tokens = tokens
        self.loss = loss
        self.attention = attention


def summarize(decoder, trace, mode, reference=None, max_summary_len=30):
    """Decode one program trace into summary-token ids.

    In "teacher" mode the reference drives the inputs and the mean per-step
    cross-entropy is returned alongside one argmax prediction per target
    (the last target is the end marker).  In "greedy" mode decoding feeds
    back its own argmax until the end marker or the length cap, and the
    returned tokens never include the start/end markers.
    """
    if mode not in ("teacher", "greedy"):
        raise ContractError("unknown decode mode %r" % (mode,))
    if max_summary_len < 1:
        raise ContractError("max_summary_len must be >= 1")
    if mode == "teacher" and reference is None:
        raise ContractError("teacher mode needs a reference")
    enc = encoder_matrix(trace)
    state = Tensor(np.zeros((1, decoder.dec_hidden_size)), requires_grad=False)
    cell = Tensor(np.zeros((1, decoder.dec_hidden_size)), requires_grad=False)
    tokens = []
    attention = []
    if mode == "teacher":
        reference = [int(t) for t in reference]
        inputs = [SUMMARY_START] + reference
        targets = np.ascontiguousarray(reference + [SUMMARY_END], dtype=np.int64)
        losses = []
        for step, prev_id in enumerate(inputs):
            logits, state, cell, weights = _decode_step(
                decoder, prev_id, state, cell, enc, None
            )
            losses.append(T.softmax_xent(logits, targets[step : step + 1]))
            tokens.append(int(np.argmax(logits.data.reshape(-1))))
            attention.append(weights.data.copy())
        loss = T.mean_all(T.concat_rows(losses))
        return SummaryResult(tokens, loss, attention)

    prev_id = SUMMARY_START
    for _ in range(max_summary_len):
        logits, state, cell, weights = _decode_step(decoder, prev_id, state, cell, enc, None)
        attention.append(weights.data.copy())
        prev_id = int(np.argmax(logits.data.reshape(-1)))
        if prev_id == SUMMARY_END:
            break
        tokens.append(prev_id)
    return SummaryResult(tokens, None, attention)
