"""AST ingestion and bracketed pre-order serialization.

Trees arrive as JSON documents, one per line in corpus files:

    {"type": "While", "value": "i", "children": [...]}

"value" is permitted only on leaves. Serialization walks the tree depth
first: a non-leaf emits its type token, an opening bracket, its children,
and a closing bracket; a leaf emits its type token followed by its value
token when it has one. Each emitted position carries a kind tag (NT for
type tokens, T for value tokens, OPEN/CLOSE for brackets, PAD after
padding) so the two token populations can be told apart downstream without
separate vocabularies.
"""

import io
import json

from .errors import ContractError, DataError, ParseError, SchemaError, StructureError

OPEN_TOKEN = "⟨"   # ⟨
CLOSE_TOKEN = "⟩"  # ⟩
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

KIND_NT = "NT"
KIND_T = "T"
KIND_OPEN = "OPEN"
KIND_CLOSE = "CLOSE"
KIND_PAD = "PAD"


class AstNode:
    """One AST node: a type label, an optional leaf value, ordered children."""

    __slots__ = ("node_type", "value", "children")

    def __init__(self, node_type, value=None, children=None):
        if not isinstance(node_type, str) or not node_type:
            raise ContractError("node_type must be a non-empty string")
        if value is not None and not isinstance(value, str):
            raise ContractError("value must be a string when present")
        children = list(children) if children else []
        if value is not None and children:
            raise ContractError("only leaves may carry a value")
        self.node_type = node_type
        self.value = value
        self.children = children

    def is_leaf(self):
        return not self.children

    def __eq__(self, other):
        if not isinstance(other, AstNode):
            return NotImplemented
        return (
            self.node_type == other.node_type
            and self.value == other.value
            and self.children == other.children
        )

    def __repr__(self):
        if self.value is not None:
            return "%s(%r)" % (self.node_type, self.value)
        if self.children:
            return "%s[%d]" % (self.node_type, len(self.children))
        return self.node_type


def node_count(tree):
    return 1 + sum(node_count(c) for c in tree.children)


def tree_depth(tree):
    if not tree.children:
        return 1
    return 1 + max(tree_depth(c) for c in tree.children)


class TokenSequence:
    """Parallel token strings and kind tags."""

    __slots__ = ("tokens", "kinds")

    def __init__(self, tokens, kinds):
        tokens = list(tokens)
        kinds = list(kinds)
        if len(tokens) != len(kinds):
            raise ContractError("tokens and kinds must have equal length")
        self.tokens = tokens
        self.kinds = kinds

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        if not isinstance(other, TokenSequence):
            return NotImplemented
        return self.tokens == other.tokens and self.kinds == other.kinds

    def text(self):
        return " ".join(self.tokens)

    def __repr__(self):
        return "TokenSequence(%s)" % self.text()


def serialize_ast(tree):
    """Flatten a tree to its bracketed pre-order token sequence."""
    tokens = []
    kinds = []

    def walk(node):
        tokens.append(node.node_type)
        kinds.append(KIND_NT)
        if node.children:
            tokens.append(OPEN_TOKEN)
            kinds.append(KIND_OPEN)
            for child in node.children:
                walk(child)
            tokens.append(CLOSE_TOKEN)
            kinds.append(KIND_CLOSE)
        elif node.value is not None:
            tokens.append(node.value)
            kinds.append(KIND_T)

    walk(tree)
    return TokenSequence(tokens, kinds)


def deserialize_sequence(seq):
    """Rebuild the tree from a serialized sequence.

    Inverse of serialize_ast on its image. Trailing padding is ignored;
    any other malformation raises StructureError naming the 0-based
    position of the offending token.
    """
    tokens = seq.tokens
    kinds = seq.kinds
    n = len(tokens)
    while n > 0 and kinds[n - 1] == KIND_PAD:
        n -= 1
    if n == 0:
        raise StructureError("position 0: empty sequence")

    pos = 0

    def fail(at, msg):
        raise StructureError("position %d: %s" % (at, msg))

    def parse_node():
        nonlocal pos
        if pos >= n:
            fail(n, "unexpected end of sequence")
        if kinds[pos] != KIND_NT:
            fail(pos, "expected a node-type token, found %s" % kinds[pos])
        node_type = tokens[pos]
        pos += 1
        if pos < n and kinds[pos] == KIND_OPEN:
            open_at = pos
            pos += 1
            children = []
            while True:
                if pos >= n:
                    fail(open_at, "unmatched %s" % OPEN_TOKEN)
                if kinds[pos] == KIND_CLOSE:
                    pos += 1
                    break
                children.append(parse_node())
            if not children:
                fail(open_at, "empty bracket pair")
            return AstNode(node_type, None, children)
        if pos < n and kinds[pos] == KIND_T:
            value = tokens[pos]
            pos += 1
            return AstNode(node_type, value)
        return AstNode(node_type)

    root = parse_node()
    if pos != n:
        if kinds[pos] == KIND_CLOSE:
            fail(pos, "unmatched %s" % CLOSE_TOKEN)
        fail(pos, "trailing tokens after the root tree")
    return root


def check_balance(seq):
    """Running bracket depth at each position; raises if ever negative or
    nonzero at the end."""
    depth = 0
    for i, kind in enumerate(seq.kinds):
        if kind == KIND_OPEN:
            depth += 1
        elif kind == KIND_CLOSE:
            depth -= 1
            if depth < 0:
                raise StructureError("position %d: unmatched %s" % (i, CLOSE_TOKEN))
    if depth != 0:
        raise StructureError("position %d: %d unclosed %s" % (len(seq), depth, OPEN_TOKEN))
    return depth


_NODE_KEYS = {"type", "value", "children"}


def _node_from_obj(obj, path):
    if not isinstance(obj, dict):
        raise SchemaError("%s: expected an object, found %s" % (path, type(obj).__name__))
    unknown = set(obj) - _NODE_KEYS
    if unknown:
        raise SchemaError("%s: unknown field %r" % (path, sorted(unknown)[0]))
    if "type" not in obj or not isinstance(obj["type"], str) or not obj["type"]:
        raise SchemaError("%s: 'type' must be a non-empty string" % path)
    value = obj.get("value")
    if value is not None and not isinstance(value, str):
        raise SchemaError("%s: 'value' must be a string" % path)
    raw_children = obj.get("children", [])
    if not isinstance(raw_children, list):
        raise SchemaError("%s: 'children' must be a list" % path)
    if value is not None and raw_children:
        raise SchemaError("%s: 'value' is only permitted on leaves" % path)
    children = [
        _node_from_obj(c, "%s.children[%d]" % (path, i)) for i, c in enumerate(raw_children)
    ]
    return AstNode(obj["type"], value, children)


def _load_json(text):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        byte_offset = len(text[: e.pos].encode("utf-8"))
        raise ParseError(
            "malformed JSON at byte %d (line %d, column %d): %s"
            % (byte_offset, e.lineno, e.colno, e.msg)
        ) from None


def parse_ast_json(text):
    """Parse one JSON tree document into an AstNode."""
    return _node_from_obj(_load_json(text), "$")


def ast_to_obj(tree):
    obj = {"type": tree.node_type}
    if tree.value is not None:
        obj["value"] = tree.value
    obj["children"] = [ast_to_obj(c) for c in tree.children]
    return obj


def ast_to_json(tree):
    return json.dumps(ast_to_obj(tree), ensure_ascii=False, sort_keys=True)


class Example:
    """One corpus entry: a tree plus optional label and summary."""

    __slots__ = ("tree", "label", "summary")

    def __init__(self, tree, label=None, summary=None):
        self.tree = tree
        self.label = label
        self.summary = summary

    def __eq__(self, other):
        if not isinstance(other, Example):
            return NotImplemented
        return (
            self.tree == other.tree
            and self.label == other.label
            and self.summary == other.summary
        )


def parse_corpus_line(text, where=""):
    """One corpus document: a tree, optionally extended with a top-level
    "label" (classification) or "summary" (space-separated target tokens)."""
    obj = _load_json(text)
    if not isinstance(obj, dict):
        raise SchemaError("%sexpected an object document" % where)
    label = obj.pop("label", None)
    summary = obj.pop("summary", None)
    if label is not None and not isinstance(label, str):
        raise SchemaError("%s'label' must be a string" % where)
    if summary is not None and not isinstance(summary, str):
        raise SchemaError("%s'summary' must be a string" % where)
    tree = _node_from_obj(obj, "$")
    return Example(tree, label, summary)


def load_corpus(path):
    """Read a newline-delimited corpus file."""
    examples = []
    try:
        fh = io.open(path, "r", encoding="utf-8")
    except OSError as e:
        raise DataError("cannot read corpus %s: %s" % (path, e)) from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                examples.append(parse_corpus_line(line))
            except (ParseError, SchemaError) as e:
                raise type(e)("%s line %d: %s" % (path, lineno, e)) from None
    if not examples:
        raise ContractError("corpus %s is empty" % path)
    return examples


def save_corpus(path, examples):
    with io.open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            obj = ast_to_obj(ex.tree)
            if ex.label is not None:
                obj["label"] = ex.label
            if ex.summary is not None:
                obj["summary"] = ex.summary
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
