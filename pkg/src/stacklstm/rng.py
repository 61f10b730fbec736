"""Deterministic random number generation.

Everything stochastic in this package (parameter init, corpus synthesis,
batch shuffling) draws from SplitMix64, a 64-bit counter-style generator
with a one-word state:

    state <- state + 0x9E3779B97F4A7C15            (golden-ratio increment)
    z <- state
    z <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
    output = z ^ (z >> 31)

The sequence is fully defined by the seed, so runs are reproducible across
machines and reimplementations, which numpy's generators do not guarantee
across versions. Throughput is not a concern at the scales used here.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Rng:
    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self):
        """Float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_array(self, shape, low=0.0, high=1.0):
        n = int(np.prod(shape)) if shape else 1
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = self.uniform()
        return (low + (high - low) * out).reshape(shape)

    def randint(self, n):
        """Integer in [0, n) without modulo bias (rejection sampling)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        limit = _MASK - (_MASK + 1) % n
        while True:
            v = self.next_u64()
            if v <= limit:
                return v % n

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def permutation(self, n):
        """Fisher-Yates shuffle of range(n), as an int64 array."""
        idx = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.randint(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx

    def spawn(self):
        """Independent child generator; advances this one by one draw."""
        return Rng(self.next_u64())

    def getstate(self):
        return self.state

    def setstate(self, state):
        self.state = int(state) & _MASK
