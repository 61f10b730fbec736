# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels.

Mirrors ``py_kernels`` function for function. A lone matmul call here can
lose to numpy on machines with a fast BLAS, but a training step is built
from thousands of small-matrix ops, and skipping numpy's per-call dispatch
and temporary churn is what pays off end to end; benchmarks/bench_backends.py
measures both views on the machine at hand. Loop orders keep the innermost
loop on a contiguous axis so it can auto-vectorize.
"""

from libc.math cimport exp, log, sqrt, tanh as c_tanh

import numpy as np

NAME = "compiled"


def matmul(a, b, ta=False, tb=False):
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    cdef Py_ssize_t m, n, k, kb
    cdef bint fa = ta, fb = tb
    m = av.shape[1] if fa else av.shape[0]
    k = av.shape[0] if fa else av.shape[1]
    kb = bv.shape[1] if fb else bv.shape[0]
    n = bv.shape[0] if fb else bv.shape[1]
    if k != kb:
        raise ValueError("matmul inner dimensions differ")
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, p
    cdef double acc, aik
    if not fa and not fb:
        for i in range(m):
            for p in range(k):
                aik = av[i, p]
                for j in range(n):
                    ov[i, j] += aik * bv[p, j]
    elif not fa and fb:
        for i in range(m):
            for j in range(n):
                acc = 0.0
                for p in range(k):
                    acc += av[i, p] * bv[j, p]
                ov[i, j] = acc
    elif fa and not fb:
        for p in range(k):
            for i in range(m):
                aik = av[p, i]
                for j in range(n):
                    ov[i, j] += aik * bv[p, j]
    else:
        for i in range(m):
            for j in range(n):
                acc = 0.0
                for p in range(k):
                    acc += av[p, i] * bv[j, p]
                ov[i, j] = acc
    return out


def add(a, b):
    out = np.empty_like(a)
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef double[::1] o = out.ravel()
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] + y[i]
    return out


def add_rowvec(a, v):
    out = np.empty_like(a)
    cdef double[:, ::1] x = a
    cdef double[::1] r = v
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            o[i, j] = x[i, j] + r[j]
    return out


def sub(a, b):
    out = np.empty_like(a)
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef double[::1] o = out.ravel()
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] - y[i]
    return out


def mul(a, b):
    out = np.empty_like(a)
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef double[::1] o = out.ravel()
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] * y[i]
    return out


def scale(a, s):
    out = np.empty_like(a)
    cdef double[::1] x = a.ravel()
    cdef double[::1] o = out.ravel()
    cdef double c = s
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] * c
    return out


def sigmoid(x):
    out = np.empty_like(x)
    cdef double[::1] xv = x.ravel()
    cdef double[::1] o = out.ravel()
    cdef Py_ssize_t i
    cdef double v, e
    for i in range(xv.shape[0]):
        v = xv[i]
        if v >= 0.0:
            o[i] = 1.0 / (1.0 + exp(-v))
        else:
            e = exp(v)
            o[i] = e / (1.0 + e)
    return out


def sigmoid_grad(y, gy):
    out = np.empty_like(y)
    cdef double[::1] yv = y.ravel()
    cdef double[::1] gv = gy.ravel()
    cdef double[::1] o = out.ravel()
    cdef Py_ssize_t i
    for i in range(yv.shape[0]):
        o[i] = gv[i] * yv[i] * (1.0 - yv[i])
    return out


def tanh(x):
    out = np.empty_like(x)
    cdef double[::1] xv = x.ravel()
    cdef double[::1] o = out.ravel()
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        o[i] = c_tanh(xv[i])
    return out


def tanh_grad(y, gy):
    out = np.empty_like(y)
    cdef double[::1] yv = y.ravel()
    cdef double[::1] gv = gy.ravel()
    cdef double[::1] o = out.ravel()
    cdef Py_ssize_t i
    for i in range(yv.shape[0]):
        o[i] = gv[i] * (1.0 - yv[i] * yv[i])
    return out


def maximum(a, b):
    out = np.empty_like(a)
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef double[::1] o = out.ravel()
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] if x[i] >= y[i] else y[i]
    return out


def maximum_grad(a, b, g):
    ga = np.empty_like(a)
    gb = np.empty_like(b)
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef double[::1] gv = g.ravel()
    cdef double[::1] oa = ga.ravel()
    cdef double[::1] ob = gb.ravel()
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        if x[i] >= y[i]:
            oa[i] = gv[i]
            ob[i] = 0.0
        else:
            oa[i] = 0.0
            ob[i] = gv[i]
    return ga, gb


def softmax_rows(x, mask=None):
    out = np.empty_like(x)
    cdef double[:, ::1] xv = x
    cdef double[:, ::1] o = out
    cdef double[:, ::1] mv
    cdef Py_ssize_t i, j, rows = xv.shape[0], cols = xv.shape[1]
    cdef double mx, s, e
    if mask is None:
        for i in range(rows):
            mx = xv[i, 0]
            for j in range(1, cols):
                if xv[i, j] > mx:
                    mx = xv[i, j]
            s = 0.0
            for j in range(cols):
                e = exp(xv[i, j] - mx)
                o[i, j] = e
                s += e
            for j in range(cols):
                o[i, j] /= s
    else:
        mv = mask
        for i in range(rows):
            mx = 0.0
            s = 0.0
            for j in range(cols):
                if mv[i, j] > 0.0 and (s == 0.0 or xv[i, j] > mx):
                    mx = xv[i, j]
                    s = 1.0
            s = 0.0
            for j in range(cols):
                if mv[i, j] > 0.0:
                    e = exp(xv[i, j] - mx)
                    o[i, j] = e
                    s += e
                else:
                    o[i, j] = 0.0
            for j in range(cols):
                o[i, j] /= s
    return out


def softmax_rows_grad(p, gp):
    out = np.empty_like(p)
    cdef double[:, ::1] pv = p
    cdef double[:, ::1] gv = gp
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(pv.shape[0]):
        dot = 0.0
        for j in range(pv.shape[1]):
            dot += gv[i, j] * pv[i, j]
        for j in range(pv.shape[1]):
            o[i, j] = pv[i, j] * (gv[i, j] - dot)
    return out


def softmax_xent(logits, targets):
    cdef double[:, ::1] lv = logits
    cdef long[::1] tv = targets
    cdef Py_ssize_t rows = lv.shape[0], cols = lv.shape[1]
    losses = np.empty(rows, dtype=np.float64)
    probs = np.empty((rows, cols), dtype=np.float64)
    cdef double[::1] lo = losses
    cdef double[:, ::1] pv = probs
    cdef Py_ssize_t i, j
    cdef double mx, s
    for i in range(rows):
        mx = lv[i, 0]
        for j in range(1, cols):
            if lv[i, j] > mx:
                mx = lv[i, j]
        s = 0.0
        for j in range(cols):
            pv[i, j] = exp(lv[i, j] - mx)
            s += pv[i, j]
        for j in range(cols):
            pv[i, j] /= s
        lo[i] = log(s) - (lv[i, tv[i]] - mx)
    return losses, probs


def softmax_xent_grad(probs, targets, glosses):
    out = np.empty_like(probs)
    cdef double[:, ::1] pv = probs
    cdef long[::1] tv = targets
    cdef double[::1] gv = glosses
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    for i in range(pv.shape[0]):
        for j in range(pv.shape[1]):
            o[i, j] = pv[i, j] * gv[i]
        o[i, tv[i]] -= gv[i]
    return out


def gather_rows(a, idx):
    cdef double[:, ::1] av = a
    cdef long[::1] iv = idx
    out = np.empty((iv.shape[0], av.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    for i in range(iv.shape[0]):
        for j in range(av.shape[1]):
            o[i, j] = av[iv[i], j]
    return out


def scatter_add_rows(g, idx, num_rows):
    cdef double[:, ::1] gv = g
    cdef long[::1] iv = idx
    out = np.zeros((num_rows, gv.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    for i in range(iv.shape[0]):
        for j in range(gv.shape[1]):
            o[iv[i], j] += gv[i, j]
    return out


def sum_all(a):
    cdef double[::1] x = a.ravel()
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        s += x[i]
    return s


def colsum(a):
    cdef double[:, ::1] av = a
    out = np.zeros(av.shape[1], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    for i in range(av.shape[0]):
        for j in range(av.shape[1]):
            o[j] += av[i, j]
    return out


def sumsq(a):
    cdef double[::1] x = a.ravel()
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return s


def adam_update(p, g, m, v, lr, b1, b2, eps, t):
    cdef double[::1] pv = p.ravel()
    cdef double[::1] gv = g.ravel()
    cdef double[::1] mv = m.ravel()
    cdef double[::1] vv = v.ravel()
    cdef double c1 = 1.0 - b1 ** t
    cdef double c2 = 1.0 - b2 ** t
    cdef double clr = lr, cb1 = b1, cb2 = b2, ce = eps
    cdef Py_ssize_t i
    for i in range(pv.shape[0]):
        mv[i] = cb1 * mv[i] + (1.0 - cb1) * gv[i]
        vv[i] = cb2 * vv[i] + (1.0 - cb2) * gv[i] * gv[i]
        pv[i] -= clr * (mv[i] / c1) / (sqrt(vv[i] / c2) + ce)
