"""Vocabulary construction and integer encoding of token sequences.

Ids 0..3 are reserved: PAD, UNK, the opening bracket, the closing bracket.
Remaining slots go to corpus tokens ranked by frequency with lexicographic
tie-breaks, so the same corpus and size always produce the same file.
"""

import io
from collections import Counter

import numpy as np

from .errors import ContractError, DataError
from .trees import (
    CLOSE_TOKEN,
    KIND_CLOSE,
    KIND_NT,
    KIND_OPEN,
    KIND_PAD,
    KIND_T,
    OPEN_TOKEN,
    PAD_TOKEN,
    TokenSequence,
    UNK_TOKEN,
)

PAD_ID = 0
UNK_ID = 1
OPEN_ID = 2
CLOSE_ID = 3

RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, OPEN_TOKEN, CLOSE_TOKEN)

# Integer codes for kind tags, for use in arrays alongside token ids.
KIND_CODES = {KIND_NT: 0, KIND_T: 1, KIND_OPEN: 2, KIND_CLOSE: 3, KIND_PAD: 4}
KIND_NAMES = [KIND_NT, KIND_T, KIND_OPEN, KIND_CLOSE, KIND_PAD]


class Vocab:
    def __init__(self, tokens):
        """tokens: full id-ordered list, reserved entries first."""
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED_TOKENS:
            raise ContractError("vocab must start with the four reserved tokens")
        if len(set(tokens)) != len(tokens):
            raise ContractError("vocab tokens must be unique")
        self._tokens = tokens
        self._ids = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._ids

    def id_of(self, token):
        return self._ids.get(token, UNK_ID)

    def token_of(self, idx):
        if not 0 <= idx < len(self._tokens):
            raise ContractError("id %d outside vocab of size %d" % (idx, len(self._tokens)))
        return self._tokens[idx]

    def tokens(self):
        return list(self._tokens)

    def save(self, path):
        with io.open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self._tokens):
                fh.write("%s\t%d\n" % (tok, i))

    @classmethod
    def load(cls, path):
        tokens = []
        with io.open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataError("%s line %d: expected token<TAB>id" % (path, lineno + 1))
                tok, idx = parts
                if int(idx) != len(tokens):
                    raise DataError("%s line %d: ids must be dense and ordered" % (path, lineno + 1))
                tokens.append(tok)
        return cls(tokens)


def build_vocab(corpus, max_size):
    """Frequency-ranked vocab over the NT/T tokens of a corpus."""
    if max_size < 5:
        raise ContractError("max_size must be at least 5 (4 ids are reserved)")
    corpus = list(corpus)
    if not corpus:
        raise ContractError("cannot build a vocab from an empty corpus")
    counts = Counter()
    for seq in corpus:
        for tok, kind in zip(seq.tokens, seq.kinds):
            if kind in (KIND_NT, KIND_T) and tok not in RESERVED_TOKENS:
                counts[tok] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, _ in ranked[: max_size - 4]]
    return Vocab(list(RESERVED_TOKENS) + kept)


class EncodedSequence:
    """Fixed-length id array plus kind codes and the true length."""

    __slots__ = ("ids", "kinds", "length")

    def __init__(self, ids, kinds, length):
        self.ids = np.ascontiguousarray(ids, dtype=np.int64)
        self.kinds = np.ascontiguousarray(kinds, dtype=np.int64)
        if self.ids.shape != self.kinds.shape:
            raise ContractError("ids and kinds must have equal shape")
        self.length = int(length)


def encode_sequence(seq, vocab, max_len):
    """Ids (UNK for out-of-vocab), truncated or right-padded to max_len."""
    if max_len < 1:
        raise ContractError("max_len must be at least 1")
    n = min(len(seq), max_len)
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    kinds = np.full(max_len, KIND_CODES[KIND_PAD], dtype=np.int64)
    for i in range(n):
        kind = seq.kinds[i]
        if kind == KIND_OPEN:
            ids[i] = OPEN_ID
        elif kind == KIND_CLOSE:
            ids[i] = CLOSE_ID
        elif kind == KIND_PAD:
            ids[i] = PAD_ID
        else:
            ids[i] = vocab.id_of(seq.tokens[i])
        kinds[i] = KIND_CODES[kind]
    return EncodedSequence(ids, kinds, n)


def decode_ids(encoded, vocab):
    """Token sequence for the unpadded prefix of an encoded sequence."""
    tokens = []
    kinds = []
    for i in range(encoded.length):
        kinds.append(KIND_NAMES[int(encoded.kinds[i])])
        tokens.append(vocab.token_of(int(encoded.ids[i])))
    return TokenSequence(tokens, kinds)
