"""Batched pointwise kernels with a compiled core and a numpy fallback.

The backend is chosen at import: the Cython extension when it was built,
otherwise the numpy implementation.  ``SEPCOORDS_BACKEND=python`` forces the
fallback; ``SEPCOORDS_BACKEND=cython`` makes a missing extension an error.
Exact (object dtype) input always goes through numpy.
"""
from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_requested = os.environ.get("SEPCOORDS_BACKEND", "auto").lower()
if _requested == "cython" and _ckernels is None:
    raise ImportError("SEPCOORDS_BACKEND=cython but sepcoords.kernels._ckernels is not built")

BACKEND = "cython" if (_ckernels is not None and _requested != "python") else "python"
AVAILABLE = ("python",) + (("cython",) if _ckernels is not None else ())


def get_backend(name: str | None = None) -> ModuleType:
    name = BACKEND if name is None else name
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ValueError("cython backend is not available")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def _pick(arrays, backend):
    if any(a.dtype == object for a in arrays):
        return _pykernels, arrays
    mod = get_backend(backend)
    if mod is _ckernels:
        arrays = tuple(np.ascontiguousarray(a, dtype=np.float64) for a in arrays)
    return mod, arrays


def killing(B, X, F, backend: str | None = None) -> np.ndarray:
    mod, (B, X, F) = _pick((B, X, F), backend)
    return mod.killing(B, X, F)


def nabla(B, X, F, backend: str | None = None) -> np.ndarray:
    mod, (B, X, F) = _pick((B, X, F), backend)
    return mod.nabla(B, X, F)


def nijenhuis(K, D, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    mod, (K, D) = _pick((K, D), backend)
    return mod.nijenhuis(K, D)


wedge_batch = _pykernels.wedge_batch
pair_arrays = _pykernels.pair_arrays

__all__ = ["BACKEND", "AVAILABLE", "get_backend", "killing", "nabla", "nijenhuis",
           "wedge_batch", "pair_arrays"]
