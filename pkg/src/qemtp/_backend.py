"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``QEMTP_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pauli_kernels_py


def _load_compiled() -> ModuleType | None:
    try:
        from . import _pauli_kernels
    except ImportError:
        return None
    return _pauli_kernels


compiled = _load_compiled()

if compiled is not None and not os.environ.get("QEMTP_PURE_PYTHON"):
    kernels: ModuleType = compiled
    BACKEND = "cython"
else:
    kernels = _pauli_kernels_py
    BACKEND = "python"


def get_kernels(name: str) -> ModuleType:
    if name == "python":
        return _pauli_kernels_py
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not built")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
