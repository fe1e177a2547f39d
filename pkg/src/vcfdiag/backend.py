"""Kernel backend selection.

The hot array kernels (im2col / col2im / pooling) exist in two flavors:
a numba ``@njit`` implementation and a pure-numpy one. The active flavor is
chosen once, at first use, from the ``VCFDIAG_BACKEND`` environment variable
(``numba`` or ``numpy``). Unset, it defaults to numba when importable and
falls back to numpy otherwise. Both flavors compute identical results; see
``vcfdiag.bench`` for a speed comparison.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

ENV_VAR = "VCFDIAG_BACKEND"

_active: str | None = None
_kernels: ModuleType | None = None


def _numba_available() -> bool:
    try:
        importlib.import_module("numba")
    except ImportError:
        return False
    return True


def available_backends() -> tuple[str, ...]:
    """Backends usable in this environment."""
    if _numba_available():
        return ("numba", "numpy")
    return ("numpy",)


def _resolve_from_env() -> str:
    requested = os.environ.get(ENV_VAR, "").strip().lower()
    if requested == "":
        return "numba" if _numba_available() else "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(
            f"{ENV_VAR}={requested!r} is not a valid backend; use 'numba' or 'numpy'"
        )
    if requested == "numba" and not _numba_available():
        raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
    return requested


def active_backend() -> str:
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    global _active
    if _active is None:
        _active = _resolve_from_env()
    return _active


def set_backend(name: str) -> None:
    """Force a backend (used by tests and the benchmark)."""
    global _active, _kernels
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = name
    _kernels = None


def kernels() -> ModuleType:
    """The active kernel module."""
    global _kernels
    if _kernels is None:
        if active_backend() == "numba":
            _kernels = importlib.import_module("vcfdiag.kernels_numba")
        else:
            _kernels = importlib.import_module("vcfdiag.kernels_numpy")
    return _kernels


def kernels_for(name: str) -> ModuleType:
    """Kernel module for an explicit backend, bypassing the active choice."""
    if name == "numba":
        return importlib.import_module("vcfdiag.kernels_numba")
    if name == "numpy":
        return importlib.import_module("vcfdiag.kernels_numpy")
    raise ValueError(f"unknown backend {name!r}")
