"""Training loop, evaluation, checkpoint save/load/verify, alpha comparison.

Everything here is deterministic for a fixed (config, corpus) pair: batch
order comes from the seeded generator, and checkpoints capture parameters,
optimizer state, RNG position, and a probe batch whose stored outputs let
a reload prove bitwise-identical behavior.
"""

import os

import numpy as np

from . import tensor as T
from .checkpoint import load_blob, save_blob
from .config import RunConfig
from .errors import ConfigError, ContractError, NumericError, SchemaError
from .heads import (
    AttentionDecoder,
    ClassifierHead,
    CompletionHead,
    argmax_class,
    classification_loss,
    completion_loss,
    predict_topk,
    summarize,
)
from .metrics import accuracy, bleu4, mrr_at_10
from .model import StackLSTM
from .ngram import NgramModel
from .optim import Adam, clip_global_norm
from .rng import Rng
from .tensor import Tape
from .trees import KIND_T, TokenSequence, serialize_ast
from .vocab import KIND_CODES, Vocab, build_vocab, encode_sequence

_NT = KIND_CODES["NT"]
_T = KIND_CODES["T"]
_OPEN = KIND_CODES["OPEN"]
_CLOSE = KIND_CODES["CLOSE"]
_PAD = KIND_CODES["PAD"]


class TaskBundle:
    """A model plus its task head and the vocabularies they index."""

    def __init__(self, config, vocab, summary_vocab=None, labels=None):
        config.validate()
        self.config = config
        self.vocab = vocab
        self.summary_vocab = summary_vocab
        self.labels = list(labels) if labels is not None else None
        self.model = StackLSTM(
            len(vocab),
            config.hidden_size,
            embedding_size=config.embedding_size,
            layers=config.layers,
            alpha=config.alpha,
            vanilla=bool(config.vanilla),
            seed=config.seed,
        )
        head_rng = Rng(config.seed + 1)
        if config.task == "completion":
            self.head = CompletionHead(len(vocab), config.hidden_size, head_rng)
        elif config.task == "classification":
            if not self.labels:
                raise ConfigError("classification needs a label set")
            if len(self.labels) < 2:
                raise ConfigError("classification needs at least two labels")
            self.head = ClassifierHead(len(self.labels), config.hidden_size, head_rng)
        else:
            if summary_vocab is None:
                raise ConfigError("summarization needs a summary vocabulary")
            self.head = AttentionDecoder(
                len(summary_vocab),
                config.hidden_size,
                config.hidden_size,
                config.embedding_size,
                config.attn_size,
                head_rng,
            )

    def parameters(self):
        return self.model.parameters() + self.head.parameters()


def encode_corpus(corpus, vocab, max_len):
    return [encode_sequence(serialize_ast(ex.tree), vocab, max_len) for ex in corpus]


def label_table(corpus):
    """Sorted distinct labels of a corpus; every example must carry one."""
    labels = set()
    for i, ex in enumerate(corpus):
        if ex.label is None:
            raise ConfigError("example %d has no label" % i)
        labels.add(ex.label)
    return sorted(labels)


def encode_labels(corpus, labels):
    table = {name: i for i, name in enumerate(labels)}
    out = np.zeros(len(corpus), dtype=np.int64)
    for i, ex in enumerate(corpus):
        if ex.label not in table:
            raise ConfigError("example %d has label %r outside the training set" % (i, ex.label))
        out[i] = table[ex.label]
    return out


def summary_token_lists(corpus):
    out = []
    for i, ex in enumerate(corpus):
        if ex.summary is None:
            raise ConfigError("example %d has no summary" % i)
        out.append(list(ex.summary))
    return out


def build_summary_vocab(summaries, max_size):
    seqs = [TokenSequence(words, [KIND_T] * len(words)) for words in summaries]
    return build_vocab(seqs, max_size=max_size)


def encode_summaries(summaries, summary_vocab, summary_len):
    return [
        [summary_vocab.id_of(w) for w in words[:summary_len]] for words in summaries
    ]


def _chunks(order, size):
    for start in range(0, len(order), size):
        yield order[start : start + size]


def _batch_loss(bundle, encs, labels, refs, idx):
    config = bundle.config
    group = [encs[i] for i in idx]
    if config.task == "completion":
        batch = bundle.model.run_batch(group, mode=config.mode)
        loss, _ = completion_loss(bundle.head, batch)
        return loss
    if config.task == "classification":
        batch = bundle.model.run_batch(group, mode=config.mode)
        loss, _ = classification_loss(bundle.head, batch, labels[idx])
        return loss
    losses = []
    for i in idx:
        trace = bundle.model.run_sequence(encs[i], mode=config.mode)
        step_loss = summarize(bundle.head, trace, "teacher", reference=refs[i]).loss
        losses.append(T.reshape(step_loss, (1, 1)))
    return T.mean_all(T.concat_rows(losses))


class TrainResult:
    __slots__ = ("bundle", "history", "best_metric", "checkpoint_path")

    def __init__(self, bundle, history, best_metric, checkpoint_path):
        self.bundle = bundle
        self.history = history
        self.best_metric = best_metric
        self.checkpoint_path = checkpoint_path


def train(config, train_corpus, valid_corpus, out_dir=None, log=None,
          target_metric=None):
    """Optimize a fresh bundle; returns the bundle, log, and best checkpoint.

    The validation metric (accuracy, or BLEU for summarization) picks the
    checkpoint to keep; ties keep the earlier epoch. target_metric stops
    training at the end of any epoch whose metric reaches it.
    """
    config.validate()
    if not train_corpus:
        raise ConfigError("training corpus is empty")
    if not valid_corpus:
        raise ConfigError("validation corpus is empty")
    vocab = build_vocab(
        [serialize_ast(ex.tree) for ex in train_corpus], max_size=config.vocab_size
    )
    labels = None
    summary_vocab = None
    refs = None
    val_labels = None
    val_refs = None
    if config.task == "classification":
        labels = label_table(train_corpus)
        if len(labels) < 2:
            raise ConfigError("classification corpus has fewer than two labels")
    elif config.task == "summarization":
        train_words = summary_token_lists(train_corpus)
        summary_vocab = build_summary_vocab(train_words, config.summary_vocab_size)
        refs = encode_summaries(train_words, summary_vocab, config.summary_len)
        val_refs = encode_summaries(
            summary_token_lists(valid_corpus), summary_vocab, config.summary_len
        )
    bundle = TaskBundle(config, vocab, summary_vocab=summary_vocab, labels=labels)
    encs = encode_corpus(train_corpus, vocab, config.max_len)
    val_encs = encode_corpus(valid_corpus, vocab, config.max_len)
    train_labels = encode_labels(train_corpus, labels) if labels else None
    if labels:
        val_labels = encode_labels(valid_corpus, labels)

    params = bundle.parameters()
    opt = Adam(params, lr=config.learning_rate)
    shuffle_rng = Rng(config.seed + 104729)
    history = []
    best_metric = None
    checkpoint_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        checkpoint_path = os.path.join(out_dir, "model.ck")
    probe = _probe_inputs(bundle, encs, train_labels, refs)

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(encs))
        total = 0.0
        count = 0
        for batch_no, idx in enumerate(_chunks(order, config.batch_size)):
            try:
                with Tape() as tape:
                    loss = _batch_loss(bundle, encs, train_labels, refs, idx)
                grads = tape.backward(loss, params=params)
                clip_global_norm(grads, 5.0)
                opt.step(grads)
            except NumericError as err:
                raise NumericError(
                    "epoch %d batch %d: %s" % (epoch, batch_no, err)
                ) from err
            total += float(loss.data.reshape(-1)[0]) * len(idx)
            count += len(idx)
        train_loss = total / count
        val_metric = _validation_metric(bundle, val_encs, val_labels, val_refs)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_metric": val_metric})
        if log is not None:
            log("epoch %d: train_loss=%.6f val_metric=%.6f" % (epoch, train_loss, val_metric))
        if best_metric is None or val_metric > best_metric:
            best_metric = val_metric
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, bundle, opt, shuffle_rng.getstate(), probe)
        if target_metric is not None and val_metric >= target_metric:
            break
    return TrainResult(bundle, history, best_metric, checkpoint_path)


def _validation_metric(bundle, encs, labels, refs):
    task = bundle.config.task
    if task == "completion":
        rows = _completion_rows(bundle, encs, top_k=1)
        preds = np.array([r[3][0] for r in rows])
        golds = np.array([r[2] for r in rows])
        return accuracy(preds, golds).value
    if task == "classification":
        preds, golds = _classification_rows(bundle, encs, labels)
        return accuracy(preds, golds).value
    hyps, refs_out = _summary_rows(bundle, encs, refs)
    return bleu4(hyps, refs_out).value


def _completion_rows(bundle, encs, top_k=10):
    """(example, position, gold id, ranked ids, gold kind) per target."""
    rows = []
    size = bundle.config.batch_size
    for start in range(0, len(encs), size):
        group = encs[start : start + size]
        batch = bundle.model.run_batch(group, mode=bundle.config.mode)
        width = batch.length
        for t in range(width - 1):
            logits = bundle.head.logits(batch.h_top[t]).data
            for b in range(len(group)):
                kind = int(batch.kinds[b, t + 1])
                if kind == _PAD:
                    continue
                gold = int(batch.ids[b, t + 1])
                ranked = predict_topk(logits[b], min(top_k, len(bundle.vocab)))
                rows.append((start + b, t + 1, gold, ranked, kind))
    if not rows:
        raise ContractError("no completion targets in the corpus")
    return rows


def _classification_rows(bundle, encs, labels):
    preds = []
    size = bundle.config.batch_size
    for start in range(0, len(encs), size):
        group = encs[start : start + size]
        batch = bundle.model.run_batch(group, mode=bundle.config.mode)
        for b in range(len(group)):
            length = int(batch.lengths[b])
            if length == 0:
                raise ContractError("cannot classify an empty example")
            logits = bundle.head.logits(T.take_row(batch.h_top[length - 1], b))
            preds.append(argmax_class(logits))
    return np.array(preds), np.asarray(labels)


def _summary_rows(bundle, encs, refs):
    hyps = []
    refs_out = []
    for enc, ref in zip(encs, refs):
        trace = bundle.model.run_sequence(enc, mode=bundle.config.mode)
        result = summarize(
            bundle.head, trace, "greedy", max_summary_len=bundle.config.summary_len
        )
        hyps.append(result.tokens)
        refs_out.append(list(ref))
    return hyps, refs_out


def evaluate(bundle, corpus):
    """EvalReports plus prediction dump lines for a task corpus."""
    config = bundle.config
    encs = encode_corpus(corpus, bundle.vocab, config.max_len)
    if config.task == "completion":
        rows = _completion_rows(bundle, encs)
        golds = np.array([r[2] for r in rows])
        preds = np.array([r[3][0] for r in rows])
        kinds = np.array([r[4] for r in rows])
        reports = [accuracy(preds, golds, slice_tag="overall")]
        for tag, mask in (
            ("NT", kinds == _NT),
            ("T", kinds == _T),
            ("bracket", (kinds == _OPEN) | (kinds == _CLOSE)),
        ):
            if mask.any():
                reports.append(accuracy(preds, golds, mask=mask, slice_tag=tag))
        reports.append(mrr_at_10([r[3] for r in rows], [r[2] for r in rows]))
        dump = [
            "%d:%d\t%s\t%s"
            % (
                ex,
                pos,
                bundle.vocab.token_of(gold),
                " ".join(bundle.vocab.token_of(i) for i in ranked),
            )
            for ex, pos, gold, ranked, _ in rows
        ]
        return reports, dump
    if config.task == "classification":
        if bundle.labels is None:
            raise ConfigError("bundle has no label table")
        golds = encode_labels(corpus, bundle.labels)
        preds, golds = _classification_rows(bundle, encs, golds)
        reports = [accuracy(preds, golds, slice_tag="overall")]
        dump = [
            "%s\t%s" % (bundle.labels[g], bundle.labels[p])
            for g, p in zip(golds, preds)
        ]
        return reports, dump
    words = summary_token_lists(corpus)
    refs = encode_summaries(words, bundle.summary_vocab, config.summary_len)
    hyps, refs_out = _summary_rows(bundle, encs, refs)
    reports = [bleu4(hyps, refs_out)]
    dump = []
    for hyp, ref in zip(hyps, refs_out):
        ref_text = " ".join(bundle.summary_vocab.token_of(i) for i in ref)
        hyp_text = " ".join(bundle.summary_vocab.token_of(i) for i in hyp)
        dump.append("%s ||| %s" % (ref_text, hyp_text))
    return reports, dump


def _probe_inputs(bundle, encs, labels, refs):
    take = min(2, len(encs))
    group = encs[:take]
    width = max(e.ids.shape[0] for e in group)
    ids = np.stack([e.ids for e in group])
    kinds = np.stack([e.kinds for e in group])
    lengths = np.array([e.length for e in group], dtype=np.int64)
    probe = {"ids": ids, "kinds": kinds, "lengths": lengths}
    if bundle.config.task == "classification":
        probe["labels"] = np.asarray(labels[:take], dtype=np.int64)
    if bundle.config.task == "summarization":
        probe["reference"] = np.asarray(refs[0], dtype=np.int64)
    return probe


def probe_forward(bundle, probe):
    """Deterministic task outputs on the probe inputs, as one flat array."""
    from .vocab import EncodedSequence

    encs = [
        EncodedSequence(probe["ids"][b].copy(), probe["kinds"][b].copy(), int(probe["lengths"][b]))
        for b in range(probe["ids"].shape[0])
    ]
    config = bundle.config
    if config.task == "completion":
        batch = bundle.model.run_batch(encs, mode=config.mode)
        pieces = [bundle.head.logits(h).data.reshape(-1) for h in batch.h_top]
        return np.concatenate(pieces)
    if config.task == "classification":
        batch = bundle.model.run_batch(encs, mode=config.mode)
        _, logits = classification_loss(bundle.head, batch, probe["labels"])
        return logits.data.reshape(-1).copy()
    trace = bundle.model.run_sequence(encs[0], mode=config.mode)
    ref = [int(x) for x in probe["reference"]]
    result = summarize(bundle.head, trace, "teacher", reference=ref)
    final = trace.final_hidden().data.reshape(-1)
    return np.concatenate([result.loss.data.reshape(-1), final])


def save_checkpoint(path, bundle, optimizer, rng_state, probe):
    header = {
        "kind": "salstm-checkpoint",
        "config": bundle.config.to_dict(),
        "vocab": [bundle.vocab.token_of(i) for i in range(len(bundle.vocab))],
        "labels": bundle.labels,
        "summary_vocab": (
            [bundle.summary_vocab.token_of(i) for i in range(len(bundle.summary_vocab))]
            if bundle.summary_vocab is not None
            else None
        ),
        "rng": int(rng_state),
        "adam_step": optimizer.t,
        "adam_lr": optimizer.lr,
    }
    arrays = {}
    for p in bundle.parameters():
        arrays["param." + p.name] = p.data
    for name, value in optimizer.state_dict()["tensors"].items():
        arrays["adam." + name] = value
    for key, value in probe.items():
        arrays["probe." + key] = value
    arrays["probe.out"] = probe_forward(bundle, probe)
    save_blob(path, header, arrays)


def load_checkpoint(path):
    """Rebuild a TaskBundle (and optimizer state) from a checkpoint file.

    Returns (bundle, optimizer, rng_state, probe, stored_probe_out).
    """
    header, arrays = load_blob(path)
    if header.get("kind") != "salstm-checkpoint":
        raise SchemaError("%s is not a model checkpoint" % (path,))
    config = RunConfig(**header["config"]).validate()
    vocab = Vocab(header["vocab"])
    summary_vocab = Vocab(header["summary_vocab"]) if header.get("summary_vocab") else None
    bundle = TaskBundle(
        config, vocab, summary_vocab=summary_vocab, labels=header.get("labels")
    )
    for p in bundle.parameters():
        key = "param." + p.name
        if key not in arrays:
            raise SchemaError("checkpoint %s is missing tensor %s" % (path, p.name))
        if arrays[key].shape != p.data.shape:
            raise SchemaError(
                "checkpoint %s: tensor %s has shape %s, expected %s"
                % (path, p.name, arrays[key].shape, p.data.shape)
            )
        p.data[...] = arrays[key]
    optimizer = Adam(bundle.parameters(), lr=header.get("adam_lr", config.learning_rate))
    adam_tensors = {
        name[len("adam.") :]: value
        for name, value in arrays.items()
        if name.startswith("adam.")
    }
    if adam_tensors:
        optimizer.load_state_dict({"t": int(header.get("adam_step", 0)), "tensors": adam_tensors})
    probe = {
        name[len("probe.") :]: value
        for name, value in arrays.items()
        if name.startswith("probe.") and name != "probe.out"
    }
    return bundle, optimizer, int(header["rng"]), probe, arrays["probe.out"]


def verify_checkpoint(path):
    """Re-run the stored probe and compare to the stored outputs bitwise."""
    bundle, _, _, probe, stored = load_checkpoint(path)
    fresh = probe_forward(bundle, probe)
    if fresh.shape != stored.shape:
        return {"bitwise_equal": False, "first_divergence": "output length changed"}
    if np.array_equal(fresh, stored):
        return {"bitwise_equal": True, "first_divergence": None}
    where = int(np.argmax(fresh != stored))
    return {
        "bitwise_equal": False,
        "first_divergence": "index %d: stored %.17g, recomputed %.17g"
        % (where, stored[where], fresh[where]),
    }


def compare_alphas(config, train_corpus, valid_corpus, alphas=("fc", "maxpool", "summarization")):
    """Train one run per combination function; rank by validation metric."""
    results = []
    for alpha in alphas:
        run_cfg = RunConfig(**config.to_dict())
        run_cfg.alpha = alpha
        result = train(run_cfg, train_corpus, valid_corpus)
        results.append({
            "alpha": alpha,
            "best_metric": result.best_metric,
            "history": result.history,
        })
    results.sort(key=lambda r: (-r["best_metric"], r["alpha"]))
    return results


def ngram_reports(train_corpus, test_corpus, n, config):
    """Fit the count baseline and score it with the shared metric machinery."""
    if not train_corpus:
        raise ContractError("ngram: empty training corpus")
    vocab = build_vocab(
        [serialize_ast(ex.tree) for ex in train_corpus], max_size=config.vocab_size
    )
    train_ids = [
        [int(x) for x in enc.ids[: enc.length]]
        for enc in encode_corpus(train_corpus, vocab, config.max_len)
    ]
    model = NgramModel(n).fit(train_ids, vocab_size=len(vocab))
    rows = []
    for ex_no, enc in enumerate(encode_corpus(test_corpus, vocab, config.max_len)):
        ids = [int(x) for x in enc.ids[: enc.length]]
        for t in range(1, len(ids)):
            context = ids[max(0, t - (n - 1)) : t] if n > 1 else []
            ranked = model.predict_topk(context, min(10, len(vocab)))
            rows.append((ex_no, t, ids[t], ranked, int(enc.kinds[t])))
    if not rows:
        raise ContractError("no completion targets in the test corpus")
    golds = np.array([r[2] for r in rows])
    preds = np.array([r[3][0] for r in rows])
    kinds = np.array([r[4] for r in rows])
    reports = [accuracy(preds, golds, slice_tag="overall")]
    for tag, mask in (
        ("NT", kinds == _NT),
        ("T", kinds == _T),
        ("bracket", (kinds == _OPEN) | (kinds == _CLOSE)),
    ):
        if mask.any():
            reports.append(accuracy(preds, golds, mask=mask, slice_tag=tag))
    reports.append(mrr_at_10([r[3] for r in rows], [r[2] for r in rows]))
    return reports
