"""Stack-augmented LSTM over bracketed syntax-tree token sequences.

The model walks a serialized tree left to right and mirrors its nesting on
an explicit stack: the hidden state is pushed when a subtree opens and the
saved state is folded back in when it closes, so long-range structure does
not have to survive inside the recurrent state alone.

Quick tour::

    from stacklstm import GeneratorSpec, generate_synthetic_corpus
    from stacklstm import default_config, train, evaluate

    corpus = generate_synthetic_corpus(GeneratorSpec(num_examples=50), seed=0)
    config = default_config("completion")
    config.hidden_size = config.embedding_size = 32
    config.epochs = 2
    result = train(config, corpus, corpus)
    reports, _ = evaluate(result.bundle, corpus)
"""

from .backend import active_backend, available_backends, use_backend
from .config import ALPHAS, MODES, TASKS, RunConfig, build_config, default_config
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    NumericError,
    ParseError,
    SchemaError,
    StackLstmError,
    StructureError,
)
from .metrics import EvalReport, accuracy, bleu4, mrr_at_10, render_json, render_text
from .model import StackLSTM, lstm_step, salstm_step
from .ngram import NgramModel
from .rng import Rng
from .synthetic import GeneratorSpec, generate_synthetic_corpus
from .train import (
    TaskBundle,
    compare_alphas,
    evaluate,
    load_checkpoint,
    ngram_reports,
    save_checkpoint,
    train,
    verify_checkpoint,
)
from .trees import (
    AstNode,
    Example,
    TokenSequence,
    ast_to_json,
    deserialize_sequence,
    load_corpus,
    parse_ast_json,
    save_corpus,
    serialize_ast,
)
from .vocab import Vocab, build_vocab, encode_sequence

__version__ = "0.1.0"

__all__ = [
    "ALPHAS",
    "AstNode",
    "ConfigError",
    "ContractError",
    "DataError",
    "DimensionError",
    "EvalReport",
    "Example",
    "GeneratorSpec",
    "MODES",
    "NgramModel",
    "NumericError",
    "ParseError",
    "Rng",
    "RunConfig",
    "SchemaError",
    "StackLSTM",
    "StackLstmError",
    "StructureError",
    "TASKS",
    "TaskBundle",
    "TokenSequence",
    "Vocab",
    "accuracy",
    "active_backend",
    "ast_to_json",
    "available_backends",
    "bleu4",
    "build_config",
    "build_vocab",
    "compare_alphas",
    "default_config",
    "deserialize_sequence",
    "encode_sequence",
    "evaluate",
    "generate_synthetic_corpus",
    "load_checkpoint",
    "load_corpus",
    "lstm_step",
    "mrr_at_10",
    "ngram_reports",
    "parse_ast_json",
    "render_json",
    "render_text",
    "salstm_step",
    "save_checkpoint",
    "save_corpus",
    "serialize_ast",
    "train",
    "use_backend",
    "verify_checkpoint",
    "__version__",
]
