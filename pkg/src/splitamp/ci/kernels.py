"""Select the determinant-Hamiltonian kernel at import time.

The compiled extension is used when it was built; otherwise (or when
``SPLITAMP_PURE_PYTHON=1`` is set) the numpy fallback is used.  Both expose
``hamiltonian_diagonal``, ``hamiltonian_dense`` and ``hamiltonian_upper``
taking ``(bits: uint64[n], h: float64[N, N], g: float64[N, N, N, N])``.
"""
from __future__ import annotations

import os

import numpy as np

from . import _hamiltonian_py as _py

BACKEND = "python"
_impl = _py
if os.environ.get("SPLITAMP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _hamiltonian as _c  # type: ignore[attr-defined]

        _impl = _c
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass


def _prepare(bits, h, g):
    return (
        np.ascontiguousarray(bits, dtype=np.uint64),
        np.ascontiguousarray(h, dtype=np.float64),
        np.ascontiguousarray(g, dtype=np.float64),
    )


def hamiltonian_diagonal(bits, h, g, impl=None) -> np.ndarray:
    return (impl or _impl).hamiltonian_diagonal(*_prepare(bits, h, g))


def hamiltonian_dense(bits, h, g, impl=None) -> np.ndarray:
    return (impl or _impl).hamiltonian_dense(*_prepare(bits, h, g))


def hamiltonian_upper(bits, h, g, impl=None):
    return (impl or _impl).hamiltonian_upper(*_prepare(bits, h, g))


def available_backends() -> dict:
    out = {"python": _py}
    try:
        from . import _hamiltonian as _c  # type: ignore[attr-defined]

        out["cython"] = _c
    except ImportError:
        pass
    return out
