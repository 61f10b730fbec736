"""Adam and clipping against hand values and a straightforward reference loop."""

import numpy as np
import pytest

from stacklstm.errors import ContractError
from stacklstm.optim import Adam, clip_global_norm, global_norm
from stacklstm.rng import Rng
from stacklstm.tensor import Tensor


def test_adam_first_step_hand_value():
    # One step from p=0 with gradient 1: both moment estimates bias-correct
    # back to exactly 1, so the update is -lr / (1 + eps).
    p = Tensor(np.zeros((1, 1)), name="p")
    opt = Adam([p], lr=1e-3)
    opt.step({p: np.ones((1, 1))})
    assert abs(p.data[0, 0] + 9.9999999e-4) < 1e-9
    assert abs(p.data[0, 0] + 1e-3 / (1.0 + 1e-8)) < 1e-15


def test_adam_matches_reference_loop():
    rng = Rng(21)
    p = Tensor(rng.uniform_array((3, 4)), name="p")
    ref = p.data.copy()
    m = np.zeros_like(ref)
    v = np.zeros_like(ref)
    lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
    opt = Adam([p], lr=lr, beta1=b1, beta2=b2, eps=eps)
    for t in range(1, 11):
        g = rng.uniform_array((3, 4), -2, 2)
        opt.step({p: g})
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        ref = ref - lr * mhat / (np.sqrt(vhat) + eps)
        assert np.max(np.abs(p.data - ref)) < 1e-12


def test_adam_skips_missing_grads_and_requires_names():
    p = Tensor(np.ones((2, 2)), name="p")
    q = Tensor(np.ones((2, 2)), name="q")
    opt = Adam([p, q])
    opt.step({p: np.ones((2, 2))})
    assert np.array_equal(q.data, np.ones((2, 2)))
    with pytest.raises(ContractError):
        Adam([Tensor(np.ones(2))])


def test_adam_state_roundtrip():
    p = Tensor(np.ones((2, 3)), name="p")
    a = Adam([p], lr=5e-3)
    for _ in range(3):
        a.step({p: np.full((2, 3), 0.3)})
    state = a.state_dict()

    q = Tensor(p.data.copy(), name="p")  # params are restored by the checkpoint layer
    b = Adam([q], lr=5e-3)
    b.load_state_dict(state)
    ga = np.full((2, 3), -0.7)
    a.step({p: ga})
    b.step({q: ga})
    assert np.array_equal(p.data, q.data)


def test_clip_global_norm_pythagorean():
    a = Tensor(np.array([[3.0]]), name="a")
    b = Tensor(np.array([[4.0]]), name="b")
    grads = {a: a.data.copy(), b: b.data.copy()}
    assert abs(global_norm(grads) - 5.0) < 1e-12

    norm = clip_global_norm(grads, 5.0)
    assert norm == 5.0
    assert grads[a][0, 0] == 3.0  # at the limit: untouched

    grads = {a: np.array([[6.0]]), b: np.array([[8.0]])}
    norm = clip_global_norm(grads, 5.0)
    assert abs(norm - 10.0) < 1e-12
    assert abs(global_norm(grads) - 5.0) < 1e-12
    assert abs(grads[a][0, 0] - 3.0) < 1e-12


def test_zero_gradient_is_a_fixed_point():
    p = Tensor(np.full((2, 2), 1.5), name="p")
    opt = Adam([p])
    for _ in range(5):
        opt.step({p: np.zeros((2, 2))})
    assert np.array_equal(p.data, np.full((2, 2), 1.5))


def test_adam_reduces_convex_quadratic():
    p = Tensor(np.array([[4.0]]), name="p")
    opt = Adam([p], lr=0.1)
    losses = []
    for _ in range(10):
        losses.append(float((p.data[0, 0] - 1.0) ** 2))
        opt.step({p: 2.0 * (p.data - 1.0)})
    assert all(b < a for a, b in zip(losses, losses[1:]))
