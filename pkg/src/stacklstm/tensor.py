"""Reverse-mode autodiff over float64 numpy arrays.

A Tensor wraps a C-contiguous float64 array. Primitive functions in this
module compute with the active kernel backend and, when a Tape is active
and some input requires gradients, record a backward closure. The backward
pass walks the recorded ops in reverse and returns a gradient map keyed by
Tensor.

Shapes are validated up front and violations raise DimensionError naming
the primitive. Every primitive checks its output for NaN/inf and raises
NumericError, so a diverging run fails loudly at the op that produced the
bad value rather than at the end of an epoch.
"""

import threading

import numpy as np

from . import backend
from .errors import DimensionError, NumericError

_local = threading.local()


class Tensor:
    """A node in the computation graph. Hashes by identity."""

    __slots__ = ("data", "name", "requires_grad")

    def __init__(self, data, name=None, requires_grad=True):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.name = name
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        label = self.name or "tensor"
        return "Tensor(%s, shape=%s)" % (label, self.data.shape)


class Tape:
    """Records primitive ops so backward() can replay them in reverse."""

    def __init__(self):
        self._ops = []

    def __enter__(self):
        stack = getattr(_local, "tapes", None)
        if stack is None:
            stack = _local.tapes = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _local.tapes.pop()
        return False

    def _record(self, out, backward):
        self._ops.append((out, backward))

    def __len__(self):
        return len(self._ops)

    def backward(self, loss, params=None, wrt=None):
        """Gradients of scalar `loss` w.r.t. `params` and `wrt` tensors.

        Returns a dict mapping each requested Tensor to a float64 array of
        its shape; tensors that do not influence the loss map to zeros.
        `wrt` may name intermediate tensors (anything produced on this
        tape), not just leaves.
        """
        if loss.data.size != 1:
            raise DimensionError(
                "backward: loss must be a scalar, got shape %s" % (loss.data.shape,)
            )
        grads = {}
        grads[loss] = np.ones_like(loss.data)
        for out, fn in reversed(self._ops):
            g = grads.get(out)
            if g is None:
                continue
            fn(g, grads)
        requested = list(params or []) + list(wrt or [])
        result = {}
        for t in requested:
            g = grads.get(t)
            if g is None:
                g = np.zeros_like(t.data)
            result[t] = g
        return result


def _tape():
    stack = getattr(_local, "tapes", None)
    if stack:
        return stack[-1]
    return None


def _accum(grads, tensor, g):
    held = grads.get(tensor)
    if held is None:
        grads[tensor] = g
    else:
        grads[tensor] = held + g


def _finish(op, data, inputs, backward):
    if not np.all(np.isfinite(data)):
        raise NumericError("%s produced a non-finite value" % op)
    rg = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=rg)
    if rg:
        tape = _tape()
        if tape is not None:
            tape._record(out, backward)
    return out


def _need_2d(op, *tensors):
    for t in tensors:
        if t.data.ndim != 2:
            raise DimensionError("%s: expected 2-d tensor, got shape %s" % (op, t.shape))


def matmul(a, b, ta=False, tb=False):
    """Matrix product of optionally transposed operands."""
    _need_2d("matmul", a, b)
    ka = a.shape[0] if ta else a.shape[1]
    kb = b.shape[1] if tb else b.shape[0]
    if ka != kb:
        raise DimensionError(
            "matmul: inner dimensions differ, %s x %s (ta=%s tb=%s)"
            % (a.shape, b.shape, ta, tb)
        )
    k = backend.kernels
    data = k.matmul(a.data, b.data, ta, tb)

    def backward(g, grads):
        if not ta and not tb:
            _accum(grads, a, k.matmul(g, b.data, False, True))
            _accum(grads, b, k.matmul(a.data, g, True, False))
        elif not ta and tb:
            _accum(grads, a, k.matmul(g, b.data, False, False))
            _accum(grads, b, k.matmul(g, a.data, True, False))
        elif ta and not tb:
            _accum(grads, a, k.matmul(b.data, g, False, True))
            _accum(grads, b, k.matmul(a.data, g, False, False))
        else:
            _accum(grads, a, k.matmul(b.data, g, True, True))
            _accum(grads, b, k.matmul(g, a.data, True, True))

    return _finish("matmul", data, (a, b), backward)


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise DimensionError("%s: shapes differ, %s vs %s" % (op, a.shape, b.shape))


def add(a, b):
    _same_shape("add", a, b)
    k = backend.kernels
    data = k.add(a.data, b.data)

    def backward(g, grads):
        _accum(grads, a, g)
        _accum(grads, b, g)

    return _finish("add", data, (a, b), backward)


def add_rowvec(a, v):
    """Add a length-N vector to every row of an (M, N) tensor."""
    _need_2d("add_rowvec", a)
    if v.data.ndim != 1 or v.data.shape[0] != a.shape[1]:
        raise DimensionError(
            "add_rowvec: vector shape %s does not match columns of %s" % (v.shape, a.shape)
        )
    k = backend.kernels
    data = k.add_rowvec(a.data, v.data)

    def backward(g, grads):
        _accum(grads, a, g)
        _accum(grads, v, k.colsum(g))

    return _finish("add_rowvec", data, (a, v), backward)


def sub(a, b):
    _same_shape("sub", a, b)
    k = backend.kernels
    data = k.sub(a.data, b.data)

    def backward(g, grads):
        _accum(grads, a, g)
        _accum(grads, b, -g)

    return _finish("sub", data, (a, b), backward)


def mul(a, b):
    _same_shape("mul", a, b)
    k = backend.kernels
    data = k.mul(a.data, b.data)

    def backward(g, grads):
        _accum(grads, a, k.mul(g, b.data))
        _accum(grads, b, k.mul(g, a.data))

    return _finish("mul", data, (a, b), backward)


def scale(a, s):
    """Multiply by a python float constant."""
    s = float(s)
    k = backend.kernels
    data = k.scale(a.data, s)

    def backward(g, grads):
        _accum(grads, a, k.scale(g, s))

    return _finish("scale", data, (a,), backward)


def sigmoid(a):
    k = backend.kernels
    data = k.sigmoid(a.data)

    def backward(g, grads):
        _accum(grads, a, k.sigmoid_grad(data, g))

    return _finish("sigmoid", data, (a,), backward)


def tanh(a):
    k = backend.kernels
    data = k.tanh(a.data)

    def backward(g, grads):
        _accum(grads, a, k.tanh_grad(data, g))

    return _finish("tanh", data, (a,), backward)


def maximum(a, b):
    """Elementwise max; on ties the gradient goes to the first operand."""
    _same_shape("maximum", a, b)
    k = backend.kernels
    data = k.maximum(a.data, b.data)

    def backward(g, grads):
        ga, gb = k.maximum_grad(a.data, b.data, g)
        _accum(grads, a, ga)
        _accum(grads, b, gb)

    return _finish("maximum", data, (a, b), backward)


def concat_cols(a, b):
    """[a | b] along the feature axis."""
    _need_2d("concat_cols", a, b)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(
            "concat_cols: row counts differ, %s vs %s" % (a.shape, b.shape)
        )
    data = np.concatenate([a.data, b.data], axis=1)
    na = a.shape[1]

    def backward(g, grads):
        _accum(grads, a, np.ascontiguousarray(g[:, :na]))
        _accum(grads, b, np.ascontiguousarray(g[:, na:]))

    return _finish("concat_cols", data, (a, b), backward)


def concat_rows(tensors):
    """Stack 2-d tensors with equal column counts along the row axis."""
    tensors = list(tensors)
    if not tensors:
        raise DimensionError("concat_rows: need at least one tensor")
    _need_2d("concat_rows", *tensors)
    cols = tensors[0].shape[1]
    for t in tensors:
        if t.shape[1] != cols:
            raise DimensionError(
                "concat_rows: column counts differ, %s vs %s" % (tensors[0].shape, t.shape)
            )
    data = np.concatenate([t.data for t in tensors], axis=0)
    offsets = np.cumsum([0] + [t.shape[0] for t in tensors])

    def backward(g, grads):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            _accum(grads, t, np.ascontiguousarray(g[lo:hi]))

    return _finish("concat_rows", data, tuple(tensors), backward)


def reshape(a, shape):
    data = np.ascontiguousarray(a.data.reshape(shape))
    old = a.data.shape

    def backward(g, grads):
        _accum(grads, a, np.ascontiguousarray(g.reshape(old)))

    return _finish("reshape", data, (a,), backward)


def take_row(a, i):
    """Row i of a 2-d tensor, as a (1, N) tensor."""
    _need_2d("take_row", a)
    i = int(i)
    if not 0 <= i < a.shape[0]:
        raise DimensionError("take_row: row %d out of range for shape %s" % (i, a.shape))
    data = a.data[i : i + 1].copy()

    def backward(g, grads):
        full = np.zeros_like(a.data)
        full[i] = g[0]
        _accum(grads, a, full)

    return _finish("take_row", data, (a,), backward)


def gather_rows(a, idx):
    """Rows of `a` selected by an int index array (with repeats allowed)."""
    _need_2d("gather_rows", a)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise DimensionError("gather_rows: index must be 1-d, got shape %s" % (idx.shape,))
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise DimensionError("gather_rows: index out of range for shape %s" % (a.shape,))
    k = backend.kernels
    data = k.gather_rows(a.data, idx)
    rows = a.shape[0]

    def backward(g, grads):
        _accum(grads, a, k.scatter_add_rows(np.ascontiguousarray(g), idx, rows))

    return _finish("gather_rows", data, (a,), backward)


def set_rows(a, idx, rows):
    """Copy of `a` with rows at `idx` replaced by the rows of `rows`.

    Indices must be distinct: each output row has exactly one source.
    """
    _need_2d("set_rows", a, rows)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if idx.ndim != 1 or idx.shape[0] != rows.shape[0]:
        raise DimensionError(
            "set_rows: need one index per replacement row, got %s for %s"
            % (idx.shape, rows.shape)
        )
    if rows.shape[1] != a.shape[1]:
        raise DimensionError(
            "set_rows: column counts differ, %s vs %s" % (a.shape, rows.shape)
        )
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise DimensionError("set_rows: index out of range for shape %s" % (a.shape,))
    if idx.size != np.unique(idx).size:
        raise DimensionError("set_rows: duplicate indices")
    data = a.data.copy()
    data[idx] = rows.data
    k = backend.kernels

    def backward(g, grads):
        ga = g.copy()
        ga[idx] = 0.0
        _accum(grads, a, ga)
        _accum(grads, rows, k.gather_rows(np.ascontiguousarray(g), idx))

    return _finish("set_rows", data, (a, rows), backward)


def blend_rows(on, off, mask):
    """Rowwise select: rows where mask is 1 come from `on`, else from `off`.

    `mask` is a constant float vector of 0/1 per row; gradients split the
    same way, so masked-out rows contribute nothing to `on`.
    """
    _same_shape("blend_rows", on, off)
    m = np.ascontiguousarray(mask, dtype=np.float64).reshape(-1, 1)
    if m.shape[0] != on.shape[0]:
        raise DimensionError(
            "blend_rows: mask length %d does not match %s" % (m.shape[0], on.shape)
        )
    data = on.data * m + off.data * (1.0 - m)

    def backward(g, grads):
        _accum(grads, on, g * m)
        _accum(grads, off, g * (1.0 - m))

    return _finish("blend_rows", data, (on, off), backward)


def softmax_rows(a, mask=None):
    """Row softmax; optional constant 0/1 mask zeroes out entries.

    Every row must keep at least one unmasked entry.
    """
    _need_2d("softmax_rows", a)
    k = backend.kernels
    if mask is not None:
        mask = np.ascontiguousarray(mask, dtype=np.float64)
        if mask.shape != a.data.shape:
            raise DimensionError(
                "softmax_rows: mask shape %s does not match %s" % (mask.shape, a.shape)
            )
        if not np.all(mask.max(axis=1) > 0.0):
            raise NumericError("softmax_rows: a row is fully masked")
    data = k.softmax_rows(a.data, mask)

    def backward(g, grads):
        _accum(grads, a, k.softmax_rows_grad(data, g))

    return _finish("softmax_rows", data, (a,), backward)


def softmax_xent(logits, targets):
    """Per-row cross entropy against integer targets. Returns (R, 1) losses."""
    _need_2d("softmax_xent", logits)
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    if targets.ndim != 1 or targets.shape[0] != logits.shape[0]:
        raise DimensionError(
            "softmax_xent: need one target per row, got %s for %s"
            % (targets.shape, logits.shape)
        )
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise DimensionError("softmax_xent: target id out of range")
    k = backend.kernels
    losses, probs = k.softmax_xent(logits.data, targets)
    data = losses.reshape(-1, 1)

    def backward(g, grads):
        _accum(
            grads,
            logits,
            k.softmax_xent_grad(probs, targets, np.ascontiguousarray(g[:, 0])),
        )

    return _finish("softmax_xent", data, (logits,), backward)


def embedding(table, ids):
    """Look up rows of an embedding table by integer id."""
    return gather_rows(table, ids)


def sum_all(a):
    """Sum of all entries, as a one-element tensor."""
    k = backend.kernels
    data = np.asarray(k.sum_all(a.data))

    def backward(g, grads):
        _accum(grads, a, np.full_like(a.data, g.reshape(-1)[0]))

    return _finish("sum_all", data, (a,), backward)


def mean_all(a):
    return scale(sum_all(a), 1.0 / a.data.size)
