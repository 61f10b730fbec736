"""Pure-Python (numpy) implementations of the numeric kernels.

This module and ``_ckernels`` expose the same functions over C-contiguous
float64 arrays; the package picks one at import time (see ``__init__``).
Gradient kernels take cached forward values where that saves work, e.g.
``sigmoid_grad`` takes the sigmoid output, not its input.
"""

import numpy as np

NAME = "python"


def matmul(a, b, ta=False, tb=False):
    x = a.T if ta else a
    y = b.T if tb else b
    return np.ascontiguousarray(x @ y)


def add(a, b):
    return a + b


def add_rowvec(a, v):
    return a + v


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def scale(a, s):
    return a * s


def sigmoid(x):
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(y, gy):
    return gy * y * (1.0 - y)


def tanh(x):
    return np.tanh(x)


def tanh_grad(y, gy):
    return gy * (1.0 - y * y)


def maximum(a, b):
    return np.maximum(a, b)


def maximum_grad(a, b, g):
    # Ties route to the first operand.
    take_a = a >= b
    ga = np.where(take_a, g, 0.0)
    gb = np.where(take_a, 0.0, g)
    return ga, gb


def softmax_rows(x, mask=None):
    if mask is None:
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
    else:
        neg = np.where(mask > 0.0, x, -np.inf)
        z = neg - neg.max(axis=1, keepdims=True)
        e = np.where(mask > 0.0, np.exp(z), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_grad(p, gp):
    dot = (gp * p).sum(axis=1, keepdims=True)
    return p * (gp - dot)


def softmax_xent(logits, targets):
    m = logits.max(axis=1, keepdims=True)
    z = logits - m
    e = np.exp(z)
    sums = e.sum(axis=1)
    probs = e / sums[:, None]
    rows = np.arange(logits.shape[0])
    losses = np.log(sums) - z[rows, targets]
    return np.ascontiguousarray(losses), probs


def softmax_xent_grad(probs, targets, glosses):
    g = probs * glosses[:, None]
    rows = np.arange(probs.shape[0])
    g[rows, targets] -= glosses
    return g


def gather_rows(a, idx):
    return np.ascontiguousarray(a[idx])


def scatter_add_rows(g, idx, num_rows):
    out = np.zeros((num_rows, g.shape[1]), dtype=np.float64)
    np.add.at(out, idx, g)
    return out


def sum_all(a):
    return float(a.sum())


def colsum(a):
    return np.ascontiguousarray(a.sum(axis=0))


def sumsq(a):
    flat = a.ravel()
    return float(flat @ flat)


def adam_update(p, g, m, v, lr, b1, b2, eps, t):
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    mhat = m / (1.0 - b1**t)
    vhat = v / (1.0 - b2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
