"""Maximum-likelihood n-gram next-token model with backoff.

Counts are kept for every context length from n-1 down to 0.  Prediction
ranks continuations of the longest observed context first, then backs off
to shorter contexts to fill the remaining slots, never repeating a token
already ranked.
"""

from collections import Counter, defaultdict

from .errors import ConfigError, ContractError


class NgramModel:
    """Next-token ranking from raw n-gram counts."""

    def __init__(self, n):
        if n < 1:
            raise ConfigError("n must be >= 1, got %d" % n)
        self.n = n
        # counts[m] maps a length-m context tuple to a Counter of next ids.
        self.counts = [defaultdict(Counter) for _ in range(n)]
        self.vocab_size = 0

    def fit(self, sequences, vocab_size=None):
        sequences = list(sequences)
        if not sequences:
            raise ContractError("ngram: empty training corpus")
        max_id = -1
        for seq in sequences:
            ids = [int(t) for t in seq]
            if not ids:
                raise ContractError("ngram: empty training sequence")
            max_id = max(max_id, max(ids))
            for t, tok in enumerate(ids):
                for m in range(min(self.n - 1, t) + 1):
                    self.counts[m][tuple(ids[t - m : t])][tok] += 1
        self.vocab_size = int(vocab_size) if vocab_size is not None else max_id + 1
        if self.vocab_size < max_id + 1:
            raise ContractError("ngram: token id %d outside vocab of %d" % (max_id, self.vocab_size))
        return self

    def _ranked_for(self, context, m):
        bucket = self.counts[m].get(tuple(context[len(context) - m :]) if m else ())
        if not bucket:
            return []
        return sorted(bucket, key=lambda tok: (-bucket[tok], tok))

    def predict_topk(self, context, k):
        """Top-k next tokens for a context, ties toward the lower id.

        Longest-context matches rank first; shorter contexts fill what is
        left; any remaining slots take unseen ids in ascending order.
        """
        if self.vocab_size == 0:
            raise ContractError("ngram: model is not fitted")
        if not 1 <= k <= self.vocab_size:
            raise ContractError("k=%d out of range for %d tokens" % (k, self.vocab_size))
        context = [int(t) for t in context]
        ranked = []
        seen = set()
        for m in range(min(self.n - 1, len(context)), -1, -1):
            for tok in self._ranked_for(context, m):
                if tok not in seen:
                    seen.add(tok)
                    ranked.append(tok)
                    if len(ranked) == k:
                        return ranked
        for tok in range(self.vocab_size):
            if tok not in seen:
                ranked.append(tok)
                if len(ranked) == k:
                    break
        return ranked
