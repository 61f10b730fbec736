"""Numeric kernel backend selection.

Two interchangeable kernel sets exist: ``_ckernels`` (compiled Cython
extension) and ``py_kernels`` (numpy). At import time the compiled one is
preferred when it built successfully; ``STACKLSTM_BACKEND=python`` or
``=compiled`` in the environment forces the choice. ``use_backend`` switches
at runtime, which the parity tests and the benchmark rely on.
"""

import os

from . import py_kernels
from ..errors import ConfigError

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

kernels = py_kernels


def _resolve(name):
    if name == "python":
        return py_kernels
    if name == "compiled":
        if _ckernels is None:
            raise ConfigError("compiled backend requested but the extension is not built")
        return _ckernels
    raise ConfigError(f"unknown backend {name!r}, expected 'python' or 'compiled'")


def use_backend(name):
    global kernels
    kernels = _resolve(name)
    return kernels


def active_backend():
    return kernels.NAME


def available_backends():
    names = ["python"]
    if _ckernels is not None:
        names.append("compiled")
    return names


_env = os.environ.get("STACKLSTM_BACKEND")
if _env:
    use_backend(_env)
elif _ckernels is not None:
    kernels = _ckernels
