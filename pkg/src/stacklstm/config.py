"""Run configuration: per-task defaults, flat key=value files, overrides."""

from dataclasses import dataclass, fields

from .errors import ConfigError

TASKS = ("completion", "classification", "summarization")
ALPHAS = ("fc", "maxpool", "summarization")
MODES = ("strict", "lenient")

# Baseline hyperparameters per task; any key can be overridden by a config
# file entry or a same-named CLI flag.
_TASK_DEFAULTS = {
    "completion": dict(
        layers=2, hidden_size=200, embedding_size=200, vocab_size=5000,
        max_len=400, batch_size=32, epochs=7,
    ),
    "classification": dict(
        layers=2, hidden_size=600, embedding_size=600, vocab_size=1000,
        max_len=600, batch_size=32, epochs=8,
    ),
    "summarization": dict(
        layers=1, hidden_size=128, embedding_size=128, vocab_size=5000,
        max_len=300, batch_size=32, epochs=10,
    ),
}


@dataclass
class RunConfig:
    task: str = "completion"
    alpha: str = "summarization"
    mode: str = "strict"
    layers: int = 2
    hidden_size: int = 200
    embedding_size: int = 200
    vocab_size: int = 5000
    max_len: int = 400
    batch_size: int = 32
    epochs: int = 7
    learning_rate: float = 1e-3
    seed: int = 0
    vanilla: int = 0
    summary_len: int = 30
    summary_vocab_size: int = 5000
    attn_size: int = 128

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError("unknown task %r (expected one of %s)" % (self.task, ", ".join(TASKS)))
        if self.alpha not in ALPHAS:
            raise ConfigError("unknown alpha %r (expected one of %s)" % (self.alpha, ", ".join(ALPHAS)))
        if self.mode not in MODES:
            raise ConfigError("unknown mode %r" % (self.mode,))
        for key in (
            "layers", "hidden_size", "embedding_size", "vocab_size", "max_len",
            "batch_size", "epochs", "summary_len", "summary_vocab_size", "attn_size",
        ):
            if getattr(self, key) < 1:
                raise ConfigError("%s must be positive, got %r" % (key, getattr(self, key)))
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.vanilla not in (0, 1):
            raise ConfigError("vanilla must be 0 or 1")
        if self.vocab_size < 5:
            raise ConfigError("vocab_size must cover the reserved rows (>= 5)")
        return self

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def default_config(task):
    """Task defaults with everything else at its base value."""
    if task not in _TASK_DEFAULTS:
        raise ConfigError("unknown task %r (expected one of %s)" % (task, ", ".join(TASKS)))
    return RunConfig(task=task, **_TASK_DEFAULTS[task])


def _convert(key, raw):
    kind = _FIELD_TYPES[key]
    try:
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError("config key %s: cannot parse %r" % (key, raw))


def parse_config_text(text):
    """Flat key=value lines; blank lines and # comments are skipped."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError("config line %d: expected key=value, got %r" % (lineno, line))
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError("config line %d: unknown key %r" % (lineno, key))
        if key in values:
            raise ConfigError("config line %d: duplicate key %r" % (lineno, key))
        values[key] = raw
    return values


def build_config(file_values=None, overrides=None):
    """Assemble a validated RunConfig.

    Precedence: task defaults < config file < explicit overrides.  The task
    itself may come from either source (overrides win) and fixes which
    defaults apply.
    """
    file_values = dict(file_values or {})
    overrides = dict(overrides or {})
    for key in overrides:
        if key not in _FIELD_TYPES:
            raise ConfigError("unknown config key %r" % (key,))
    task = overrides.get("task", file_values.get("task", "completion"))
    config = default_config(str(task))
    for source in (file_values, overrides):
        for key, raw in source.items():
            setattr(config, key, _convert(key, raw))
    return config.validate()


def load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as err:
        raise ConfigError("cannot read config file %s: %s" % (path, err))
