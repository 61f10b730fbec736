"""Synthetic program corpora for desk-scale experiments.

Three generator modes:

- "random": unconstrained trees under depth/fanout bounds, for language
  modeling and round-trip tests.
- "families": each example nests a family-specific spine of block types,
  decorated with random leaves; the label names the family. Labels are
  assigned round-robin so the distribution matches the quota exactly.
- "long_range": a tag leaf near the start determines the label, then a
  filler block pushes the sequence end at least `filler_len` tokens away
  from the tag, so only the popped hidden state carries the answer cheaply.

All randomness flows through one Rng, so a (spec, seed) pair always
produces the identical corpus.
"""

from dataclasses import dataclass

from .errors import ConfigError
from .rng import Rng
from .trees import AstNode, Example, serialize_ast


@dataclass
class GeneratorSpec:
    mode: str = "random"
    num_examples: int = 100
    max_depth: int = 4
    max_fanout: int = 3
    block_types: tuple = ("Block", "Loop", "Cond", "Call")
    leaf_types: tuple = ("Name", "Num", "Op")
    leaf_values: tuple = ("a", "b", "c", "x", "y", "n0", "n1", "n2")
    branch_prob: float = 0.55
    value_prob: float = 0.8
    num_families: int = 4
    family_depth: int = 3
    filler_len: int = 300
    with_summary: bool = False
    summary_max_tokens: int = 8


def _validate(spec):
    if spec.num_examples < 1:
        raise ConfigError("num_examples must be positive")
    if spec.max_depth < 1 or spec.max_fanout < 1:
        raise ConfigError("depth and fanout bounds must be positive")
    if not spec.leaf_types:
        raise ConfigError("need at least one leaf type")
    if spec.mode not in ("random", "families", "long_range"):
        raise ConfigError("unknown generator mode %r" % spec.mode)
    if spec.mode != "random":
        if not spec.block_types:
            raise ConfigError("need at least one block type")
        if spec.max_depth < 2:
            raise ConfigError("%s mode needs nesting; max_depth must be >= 2" % spec.mode)
        if spec.num_families < 1:
            raise ConfigError("num_families must be positive")
    if spec.mode == "families":
        if spec.family_depth < 1:
            raise ConfigError("family_depth must be positive")
        if spec.max_depth < spec.family_depth + 1:
            raise ConfigError("max_depth too small for family_depth nesting")
        if len(spec.block_types) ** spec.family_depth < spec.num_families:
            raise ConfigError("not enough block-type patterns for the requested families")
    if spec.mode == "long_range" and spec.filler_len < 1:
        raise ConfigError("filler_len must be positive")


def _leaf(rng, spec):
    t = rng.choice(spec.leaf_types)
    if spec.leaf_values and rng.uniform() < spec.value_prob:
        return AstNode(t, rng.choice(spec.leaf_values))
    return AstNode(t)


def _random_tree(rng, spec, depth):
    if depth < spec.max_depth and rng.uniform() < spec.branch_prob:
        t = rng.choice(spec.block_types) if spec.block_types else rng.choice(spec.leaf_types)
        n = 1 + rng.randint(spec.max_fanout)
        return AstNode(t, None, [_random_tree(rng, spec, depth + 1) for _ in range(n)])
    return _leaf(rng, spec)


def _random_root(rng, spec):
    if spec.max_depth == 1 or not spec.block_types:
        return _leaf(rng, spec)
    n = 1 + rng.randint(spec.max_fanout)
    t = rng.choice(spec.block_types)
    return AstNode(t, None, [_random_tree(rng, spec, 2) for _ in range(n)])


def _family_pattern(spec, family):
    # Digits of the family index in base len(block_types), padded to
    # family_depth, read as a nesting pattern of block types.
    base = len(spec.block_types)
    digits = []
    k = family
    for _ in range(spec.family_depth):
        digits.append(k % base)
        k //= base
    return [spec.block_types[d] for d in reversed(digits)]


def _family_tree(rng, spec, family):
    pattern = _family_pattern(spec, family)
    node = None
    for block in reversed(pattern):
        inner = [] if node is None else [node]
        kids = (
            [_leaf(rng, spec) for _ in range(rng.randint(spec.max_fanout))]
            + inner
            + [_leaf(rng, spec) for _ in range(rng.randint(spec.max_fanout))]
        )
        if not kids:
            kids = [_leaf(rng, spec)]
        node = AstNode(block, None, kids)
    return node


def _long_range_tree(rng, spec, family):
    tag = AstNode("Tag", "tag_%d" % family)
    # Each valued leaf serializes to two tokens; overshoot by a couple of
    # leaves so the tag-to-end distance clears filler_len with room.
    n_leaves = spec.filler_len // 2 + 2
    filler = AstNode(
        "Filler", None, [AstNode("Pad", rng.choice(spec.leaf_values)) for _ in range(n_leaves)]
    )
    return AstNode("Program", None, [tag, filler])


def _summary_tokens(tree, cap):
    # The summary of a tree is the stream of its leaf values in pre-order.
    out = []

    def walk(node):
        if len(out) >= cap:
            return
        if node.value is not None:
            out.append(node.value)
        for c in node.children:
            walk(c)

    walk(tree)
    if not out:
        out = [tree.node_type.lower()]
    return out[:cap]


def generate_synthetic_corpus(spec, seed):
    """Deterministic corpus for a GeneratorSpec; see the module docstring."""
    _validate(spec)
    rng = Rng(seed)
    examples = []
    for i in range(spec.num_examples):
        if spec.mode == "random":
            tree = _random_root(rng, spec)
            label = None
        elif spec.mode == "families":
            family = i % spec.num_families
            tree = _family_tree(rng, spec, family)
            label = "family_%d" % family
        else:
            family = i % spec.num_families
            tree = _long_range_tree(rng, spec, family)
            label = "tag_%d" % family
        summary = None
        if spec.with_summary:
            summary = " ".join(_summary_tokens(tree, spec.summary_max_tokens))
        examples.append(Example(tree, label, summary))
    return examples


def tag_distance(example):
    """Tokens between the label-determining tag value and the sequence end."""
    seq = serialize_ast(example.tree)
    idx = seq.tokens.index(example.label)
    return len(seq) - 1 - idx
