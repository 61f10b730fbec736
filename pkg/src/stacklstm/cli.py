"""Command-line interface: train, evaluate, complete, serialize, gen-corpus, ngram.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure during optimization or inference.
"""

import argparse
import os
import sys
from dataclasses import fields

from . import tensor as T
from .config import RunConfig, build_config, load_config_file
from .errors import ConfigError, ContractError, DataError, NumericError
from .heads import predict_topk
from .metrics import EvalReport, render_json, render_text
from .synthetic import GeneratorSpec, generate_synthetic_corpus
from .train import evaluate, load_checkpoint, ngram_reports, train, verify_checkpoint
from .trees import TokenSequence, load_corpus, parse_ast_json, save_corpus, serialize_ast
from .vocab import encode_sequence


def _read_ast_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_ast_json(fh.read())
    except OSError as err:
        raise DataError("cannot read AST document %s: %s" % (path, err)) from None

_CONFIG_KEYS = [f.name for f in fields(RunConfig)]
_INT_KEYS = {f.name for f in fields(RunConfig) if f.type in (int, "int")}


def _add_config_flags(parser):
    parser.add_argument("--config", help="flat key=value config file")
    for key in _CONFIG_KEYS:
        parser.add_argument("--" + key, dest="cfg_" + key, default=None)


def _config_from_args(args):
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {}
    for key in _CONFIG_KEYS:
        raw = getattr(args, "cfg_" + key, None)
        if raw is not None:
            overrides[key] = raw
    return build_config(file_values=file_values, overrides=overrides)


def _display_reports(reports):
    """BLEU is carried in [0,1] but conventionally printed x100."""
    shown = []
    for rep in reports:
        if rep.metric == "bleu4":
            scaled = EvalReport(rep.metric, rep.slice, rep.value * 100.0,
                                rep.numerator, rep.denominator)
            shown.append(scaled)
        else:
            shown.append(rep)
    return shown


def _write_reports(reports, dump, out_dir):
    if not out_dir:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(render_json(reports))
    if dump is not None:
        with open(os.path.join(out_dir, "predictions.txt"), "w", encoding="utf-8") as fh:
            for line in dump:
                fh.write(line + "\n")


def _cmd_train(args):
    config = _config_from_args(args)
    train_corpus = load_corpus(args.train)
    valid_corpus = load_corpus(args.valid)
    out_dir = args.out_dir or "."
    result = train(config, train_corpus, valid_corpus, out_dir=out_dir, log=print)
    print("best val_metric=%.6f" % result.best_metric)
    print("checkpoint: %s" % result.checkpoint_path)
    return 0


def _cmd_evaluate(args):
    bundle, _, _, _, _ = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.test)
    reports, dump = evaluate(bundle, corpus)
    sys.stdout.write(render_text(_display_reports(reports)))
    _write_reports(reports, dump, args.out_dir)
    return 0


def _cmd_verify(args):
    report = verify_checkpoint(args.checkpoint)
    if report["bitwise_equal"]:
        print("probe outputs are bitwise identical")
        return 0
    print("probe divergence: %s" % report["first_divergence"])
    return 3


def _cmd_complete(args):
    bundle, _, _, _, _ = load_checkpoint(args.checkpoint)
    if bundle.config.task != "completion":
        raise ConfigError(
            "checkpoint was trained for task %r, not completion" % bundle.config.task
        )
    tree = _read_ast_file(args.input)
    seq = serialize_ast(tree)
    prefix = len(seq)
    if args.prefix_len is not None:
        if not 1 <= args.prefix_len <= len(seq):
            raise ConfigError(
                "prefix-len %d outside 1..%d" % (args.prefix_len, len(seq))
            )
        prefix = args.prefix_len
    clipped = TokenSequence(seq.tokens[:prefix], seq.kinds[:prefix])
    enc = encode_sequence(clipped, bundle.vocab, prefix)
    # A prefix is usually bracket-unbalanced, so lenient mode is forced.
    trace = bundle.model.run_sequence(enc, mode="lenient")
    logits = bundle.head.logits(trace.final_hidden())
    probs = T.softmax_rows(logits).data[0]
    k = args.k if args.k is not None else min(10, len(bundle.vocab))
    ranked = predict_topk(logits.data[0], k)
    for token_id in ranked:
        print("%s\t%.9f" % (bundle.vocab.token_of(token_id), probs[token_id]))
    return 0


def _cmd_serialize(args):
    tree = _read_ast_file(args.input)
    print(" ".join(serialize_ast(tree).tokens))
    return 0


def _cmd_gen_corpus(args):
    spec = GeneratorSpec(
        mode=args.mode,
        num_examples=args.num_examples,
        max_depth=args.max_depth,
        max_fanout=args.max_fanout,
        num_families=args.num_families,
        filler_len=args.filler_len,
        with_summary=bool(args.with_summary),
    )
    corpus = generate_synthetic_corpus(spec, seed=args.seed)
    save_corpus(args.out, corpus)
    print("wrote %d examples to %s" % (len(corpus), args.out))
    return 0


def _cmd_ngram(args):
    config = _config_from_args(args)
    train_corpus = load_corpus(args.train)
    test_corpus = load_corpus(args.test)
    reports = ngram_reports(train_corpus, test_corpus, args.n, config)
    sys.stdout.write(render_text(_display_reports(reports)))
    _write_reports(reports, None, args.out_dir)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stacklstm",
        description="Stack-augmented LSTM over bracketed syntax-tree sequences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and keep the best checkpoint")
    p_train.add_argument("--train", required=True, help="training corpus (jsonl)")
    p_train.add_argument("--valid", required=True, help="validation corpus (jsonl)")
    p_train.add_argument("--out-dir", default=None)
    _add_config_flags(p_train)
    p_train.set_defaults(fn=_cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a checkpoint on a test corpus")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--test", required=True)
    p_eval.add_argument("--out-dir", default=None)
    p_eval.set_defaults(fn=_cmd_evaluate)

    p_verify = sub.add_parser("verify", help="re-run a checkpoint's probe batch")
    p_verify.add_argument("--checkpoint", required=True)
    p_verify.set_defaults(fn=_cmd_verify)

    p_complete = sub.add_parser("complete", help="suggest the next token for a program prefix")
    p_complete.add_argument("--checkpoint", required=True)
    p_complete.add_argument("--input", required=True, help="AST document (json)")
    p_complete.add_argument("--k", type=int, default=None)
    p_complete.add_argument("--prefix-len", type=int, default=None,
                            help="serialize only the first N tokens")
    p_complete.set_defaults(fn=_cmd_complete)

    p_ser = sub.add_parser("serialize", help="print the bracketed token sequence of an AST")
    p_ser.add_argument("--input", required=True, help="AST document (json)")
    p_ser.set_defaults(fn=_cmd_serialize)

    p_gen = sub.add_parser("gen-corpus", help="write a synthetic corpus")
    p_gen.add_argument("--mode", default="random",
                       choices=("random", "families", "long_range"))
    p_gen.add_argument("--num-examples", type=int, default=100)
    p_gen.add_argument("--max-depth", type=int, default=5)
    p_gen.add_argument("--max-fanout", type=int, default=4)
    p_gen.add_argument("--num-families", type=int, default=4)
    p_gen.add_argument("--filler-len", type=int, default=300)
    p_gen.add_argument("--with-summary", action="store_true")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(fn=_cmd_gen_corpus)

    p_ngram = sub.add_parser("ngram", help="n-gram completion baseline")
    p_ngram.add_argument("--n", type=int, required=True)
    p_ngram.add_argument("--train", required=True)
    p_ngram.add_argument("--test", required=True)
    p_ngram.add_argument("--out-dir", default=None)
    _add_config_flags(p_ngram)
    p_ngram.set_defaults(fn=_cmd_ngram)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ContractError) as err:
        print("config error: %s" % err, file=sys.stderr)
        return 2
    except DataError as err:
        print("data error: %s" % err, file=sys.stderr)
        return 3
    except NumericError as err:
        print("numeric failure: %s" % err, file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
