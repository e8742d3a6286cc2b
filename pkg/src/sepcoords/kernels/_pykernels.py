"""Numpy implementation of the batched pointwise kernels.

Shapes: ``B`` is (N, N), ``X`` is (P, d), ``F`` is (P, n, d) with d = n + 1
and N = d(d-1)/2.  These routines also accept ``object`` arrays of
Fractions, which is how exact mode is evaluated.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import permutations

import numpy as np


@lru_cache(maxsize=None)
def pair_arrays(d: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(d, k=1)
    return i, j


def wedge_batch(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    i, j = pair_arrays(x.shape[-1])
    return x[..., i] * u[..., j] - x[..., j] * u[..., i]


def _frame_bivectors(B, X, F):
    w0 = wedge_batch(X[:, None, :], F)  # (P, n, N): x ^ f_a
    bw0 = w0 @ B  # B symmetric
    return w0, bw0


def killing(B: np.ndarray, X: np.ndarray, F: np.ndarray) -> np.ndarray:
    w0, bw0 = _frame_bivectors(B, X, F)
    return bw0 @ np.swapaxes(w0, 1, 2)


def nabla(B: np.ndarray, X: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Covariant derivative D[p, c, a, b] = (nabla_{f_c} K)(f_a, f_b)."""
    w0, bw0 = _frame_bivectors(B, X, F)
    w1 = wedge_batch(F[:, :, None, :], F[:, None, :, :])  # (P, n, n, N): f_c ^ f_a
    t = w1 @ np.swapaxes(bw0, 1, 2)[:, None, :, :]  # B(f_c ^ f_a, x ^ f_b)
    return t + np.swapaxes(t, 2, 3)


_PERMS = [(p, 1 - 2 * (sum(p[i] > p[j] for i in range(3) for j in range(i + 1, 3)) % 2))
          for p in permutations(range(3))]


def antisymmetrize3(t: np.ndarray) -> np.ndarray:
    """Antisymmetrize the last three axes with weight 1/6."""
    lead = t.ndim - 3
    out = None
    for perm, sign in _PERMS:
        term = np.transpose(t, tuple(range(lead)) + tuple(lead + q for q in perm))
        out = sign * term if out is None else out + sign * term
    return out / 6


def nijenhuis_tensors(K: np.ndarray, D: np.ndarray) -> list[np.ndarray]:
    """The three antisymmetrized integrability tensors, each (P, n, n, n)."""
    K2 = K @ K
    K3 = K2 @ K
    t1 = np.einsum("pda,pbcd->pabc", K, D)
    t2 = np.einsum("pda,pbcd->pabc", K2, D) + np.einsum("pda,peb,pdce->pabc", K, K, D)
    t3 = np.einsum("pda,pbcd->pabc", K3, D) + np.einsum("pda,pbf,pdcf->pabc", K, K2, D)
    return [antisymmetrize3(t) for t in (t1, t2, t3)]


def nijenhuis(K: np.ndarray, D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point max-abs and Frobenius norms, each of shape (P, 3)."""
    P = K.shape[0]
    if K.shape[1] < 3:
        z = np.zeros((P, 3))
        return z, z.copy()
    ts = nijenhuis_tensors(K, D)
    mx = np.stack([np.abs(t).reshape(P, -1).max(axis=1) for t in ts], axis=1)
    fro = np.stack([np.sqrt((np.asarray(t, dtype=float) ** 2).reshape(P, -1).sum(axis=1)) for t in ts], axis=1)
    return np.asarray(mx, dtype=float), fro
