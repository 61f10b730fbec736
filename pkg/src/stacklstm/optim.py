"""Adam with bias correction, plus global-norm gradient clipping."""

import math

import numpy as np

from . import backend
from .errors import ContractError


def global_norm(grads):
    """L2 norm over all arrays in a gradient map."""
    k = backend.kernels
    total = 0.0
    for g in grads.values():
        total += k.sumsq(g)
    return math.sqrt(total)


def clip_global_norm(grads, max_norm):
    """Scale the whole gradient map in place so its global norm is at most
    max_norm. Returns the pre-clip norm."""
    norm = global_norm(grads)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for t in grads:
            grads[t] = grads[t] * factor
    return norm


class Adam:
    """Adam over a fixed list of named parameter tensors.

    Moment slots are keyed by parameter name so the optimizer state can be
    checkpointed and restored independently of object identity. Updates are
    applied in place through the kernel backend.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.params = list(params)
        names = [p.name for p in self.params]
        if None in names or len(set(names)) != len(names):
            raise ContractError("Adam requires uniquely named parameters")
        self.slots = {
            p.name: (np.zeros_like(p.data), np.zeros_like(p.data)) for p in self.params
        }

    def step(self, grads):
        """Apply one update from a gradient map (Tensor -> array)."""
        self.t += 1
        k = backend.kernels
        for p in self.params:
            g = grads.get(p)
            if g is None:
                continue
            m, v = self.slots[p.name]
            k.adam_update(
                p.data, np.ascontiguousarray(g), m, v,
                self.lr, self.beta1, self.beta2, self.eps, self.t,
            )

    def state_dict(self):
        out = {"t": self.t}
        tensors = {}
        for name, (m, v) in sorted(self.slots.items()):
            tensors[name + ".m"] = m.copy()
            tensors[name + ".v"] = v.copy()
        out["tensors"] = tensors
        return out

    def load_state_dict(self, state):
        self.t = int(state["t"])
        tensors = state["tensors"]
        for name in self.slots:
            m = tensors[name + ".m"]
            v = tensors[name + ".v"]
            if m.shape != self.slots[name][0].shape:
                raise ContractError("Adam state shape mismatch for %s" % name)
            self.slots[name] = (
                np.array(m, dtype=np.float64, copy=True),
                np.array(v, dtype=np.float64, copy=True),
            )
