"""Central finite-difference validation of analytic gradients.

The checker reruns a user-supplied loss function with each parameter entry
nudged by +/-eps and compares the central difference against the analytic
gradient. Relative error uses max(|analytic|, |numeric|, floor) in the
denominator so tiny gradients do not blow up the ratio.
"""

import numpy as np

from .errors import ContractError
from .tensor import Tape

REL_FLOOR = 1e-6


class ParamCheck:
    def __init__(self, name, max_rel, worst_index, analytic, numeric, entries):
        self.name = name
        self.max_rel = max_rel
        self.worst_index = worst_index
        self.analytic = analytic
        self.numeric = numeric
        self.entries = entries


class FdReport:
    """Per-parameter and overall worst relative error."""

    def __init__(self, checks):
        self.checks = checks
        self.max_rel = max((c.max_rel for c in checks), default=0.0)
        self.entries = sum(c.entries for c in checks)

    def passed(self, tol):
        return self.max_rel < tol

    def summary(self):
        lines = ["max relative error %.3e over %d entries" % (self.max_rel, self.entries)]
        for c in sorted(self.checks, key=lambda c: -c.max_rel):
            lines.append(
                "  %-24s max_rel=%.3e at %s (analytic=%.6e numeric=%.6e)"
                % (c.name, c.max_rel, c.worst_index, c.analytic, c.numeric)
            )
        return "\n".join(lines)


def _rel_err(a, f):
    return abs(a - f) / max(abs(a), abs(f), REL_FLOOR)


def finite_difference_check(loss_fn, params, eps=1e-5, analytic=None, max_entries=None, rng=None):
    """Compare analytic gradients of loss_fn against central differences.

    loss_fn must be a deterministic zero-argument callable returning a
    scalar Tensor computed from the given params. When `analytic` is None
    the gradients are taken from a taped run of loss_fn. `max_entries`
    caps the checked entries per parameter (sampled with `rng`); by
    default every entry is checked.
    """
    params = list(params)
    if analytic is None:
        with Tape() as tape:
            loss = loss_fn()
        analytic = tape.backward(loss, params=params)

    checks = []
    for p in params:
        grad = analytic[p]
        flat = p.data.reshape(-1)
        n = flat.shape[0]
        if max_entries is not None and n > max_entries:
            if rng is None:
                raise ContractError("max_entries sampling needs an rng")
            order = rng.permutation(n)
            indices = sorted(order[:max_entries].tolist())
        else:
            indices = range(n)
        worst = (0.0, 0, 0.0, 0.0)
        count = 0
        for i in indices:
            keep = flat[i]
            flat[i] = keep + eps
            up = float(loss_fn().data.reshape(-1)[0])
            flat[i] = keep - eps
            down = float(loss_fn().data.reshape(-1)[0])
            flat[i] = keep
            numeric = (up - down) / (2.0 * eps)
            a = float(grad.reshape(-1)[i])
            rel = _rel_err(a, numeric)
            count += 1
            if rel > worst[0]:
                worst = (rel, i, a, numeric)
        idx = np.unravel_index(worst[1], p.data.shape) if p.data.ndim else ()
        checks.append(ParamCheck(p.name or "param", worst[0], tuple(int(x) for x in idx), worst[2], worst[3], count))
    return FdReport(checks)
