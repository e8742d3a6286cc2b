"""Pointwise integrability residuals and Stäckel-system extraction on S^n.

Residuals are evaluated in orthonormal frames, so index placement is
immaterial.  A Stäckel system is recovered from one integrable Killing
tensor as a nullspace: all forms whose Killing tensor is diagonal in the
eigenframe of the given one at every sampled point.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.linalg

from . import kernels
from .bivector import (
    DEFAULT_TOL,
    BivectorForm,
    PointFrame,
    Tolerances,
    as_form,
    eval_killing,
    eval_killing_many,
    eval_nabla_killing,
    eval_nabla_killing_fd,
    eval_nabla_killing_many,
    num_pairs,
    pair_index,
    pairs,
    plucker_forms,
    sample_frames,
    stack_frames,
    wedge,
)


class StackelError(ValueError):
    """Extraction failed: precondition, rank anomaly or invariant violation."""

    def __init__(self, message: str, spectrum: Sequence[float] = ()):
        super().__init__(message)
        self.spectrum = list(spectrum)


class EigenSolverError(RuntimeError):
    pass


# -- residuals -----------------------------------------------------------------

def _symmetrize3(D: np.ndarray) -> np.ndarray:
    return (D + D.transpose(0, 2, 1) + D.transpose(1, 0, 2)
            + D.transpose(1, 2, 0) + D.transpose(2, 0, 1) + D.transpose(2, 1, 0)) / 6


def killing_residual(B, p: PointFrame, method: str = "analytic", h: float = 1e-5) -> float:
    """Max-abs of the full symmetrization of (nabla_c K)_ab over (a, b, c).

    ``method="fd"`` uses the finite-difference derivative instead.
    """
    B = as_form(B)
    if method == "analytic":
        D = np.asarray(eval_nabla_killing(B, p), dtype=float)
    elif method == "fd":
        D = eval_nabla_killing_fd(B, p, h)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.abs(_symmetrize3(D)).max())


def killing_residuals(B, frames, backend: str | None = None) -> np.ndarray:
    """Vectorized :func:`killing_residual` (analytic) over many frames."""
    D = np.asarray(eval_nabla_killing_many(as_form(B), frames, backend), dtype=float)
    S = (D + D.transpose(0, 2, 3, 1) + D.transpose(0, 3, 1, 2)) / 3
    return np.abs(S).reshape(D.shape[0], -1).max(axis=1)


def nijenhuis_residuals(B, frames, norm: str = "max", backend: str | None = None) -> np.ndarray:
    """Residuals of the three integrability conditions at each frame, shape (P, 3)."""
    B = as_form(B)
    K = eval_killing_many(B, frames, backend)
    D = eval_nabla_killing_many(B, frames, backend)
    mx, fro = kernels.nijenhuis(K, D, backend)
    if norm == "max":
        return mx
    if norm == "fro":
        return fro
    raise ValueError(f"unknown norm {norm!r}")


def nijenhuis_residual(B, p: PointFrame, norm: str = "max") -> np.ndarray:
    """Residuals of the three Nijenhuis integrability conditions at ``p``.

    Each condition is assembled from K and nabla K in the frame and
    antisymmetrized over its three free indices.  ``norm="max"`` returns
    max-abs components; ``norm="fro"`` returns frame-independent Frobenius
    norms.  For n = 2 all three vanish identically.
    """
    return nijenhuis_residuals(B, [p], norm)[0]


def commutation_residual(B1, B2, p: PointFrame) -> float:
    """Max-abs of [K1, K2] at ``p``; exactly 0 if either form is a metric multiple."""
    B1, B2 = as_form(B1), as_form(B2)
    if B1.n != B2.n:
        raise ValueError("dimension mismatch")
    if B1.is_metric_multiple() or B2.is_metric_multiple():
        return 0.0
    K1 = np.asarray(eval_killing(B1, p), dtype=float)
    K2 = np.asarray(eval_killing(B2, p), dtype=float)
    return float(np.abs(K1 @ K2 - K2 @ K1).max())


def _eigvalsh(K: np.ndarray) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if not np.all(np.isfinite(K)):
        raise EigenSolverError("non-finite Killing tensor components")
    try:
        return np.linalg.eigvalsh(K)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc


def eigen_simplicity(B, p: PointFrame, gap: float = DEFAULT_TOL.gap) -> bool:
    """True iff every pair of eigenvalues of K at ``p`` is separated by more than ``gap``."""
    if gap <= 0:
        raise ValueError("gap must be positive")
    w = _eigvalsh(eval_killing(as_form(B), p))
    return bool(np.all(np.diff(w) > gap))


# -- reports ----------------------------------------------------------------------

@dataclass
class ResidualReport:
    killing_max: float
    nijenhuis_max: list[float]
    points_sampled: int
    seed: int
    commutation_max: float = 0.0
    tol: float = DEFAULT_TOL.commute
    passed: bool = True
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.points_sampled < 1:
            raise ValueError("points_sampled must be >= 1")
        if self.killing_max < 0 or self.commutation_max < 0 or any(v < 0 for v in self.nijenhuis_max):
            raise ValueError("residuals must be non-negative")

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ResidualReport":
        data = {k: v for k, v in data.items() if k != "verdict"}
        return cls(**data)


# -- symmetric-matrix coordinates ------------------------------------------------

def sym_coords(B: np.ndarray) -> np.ndarray:
    """Frobenius-orthonormal coordinates of symmetric matrices (last two axes)."""
    N = B.shape[-1]
    iu = np.triu_indices(N)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return B[..., iu[0], iu[1]] * w


def from_sym_coords(c: np.ndarray, N: int) -> np.ndarray:
    iu = np.triu_indices(N)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    m = np.zeros((N, N))
    m[iu] = c / w
    return m + np.triu(m, 1).T


def _sym_outer_coords(w_a: np.ndarray, w_b: np.ndarray) -> np.ndarray:
    """Coordinates of sym(w_a w_b^T): the functional B -> w_a^T B w_b."""
    S = (w_a[..., :, None] * w_b[..., None, :] + w_b[..., :, None] * w_a[..., None, :]) / 2
    return sym_coords(S)


_COMPLEMENT_CACHE: dict[int, np.ndarray] = {}


def killing_quotient_basis(n: int) -> np.ndarray:
    """Orthonormal basis (columns, in sym coords) of the complement of the
    forms inducing the zero Killing tensor.  Identity and diagonal forms lie in it."""
    if n not in _COMPLEMENT_CACHE:
        N = num_pairs(n + 1)
        M = N * (N + 1) // 2
        pl = plucker_forms(n)
        if pl:
            P = np.stack([sym_coords(f.matrix()) for f in pl])
            Q = scipy.linalg.null_space(P)
        else:
            Q = np.eye(M)
        _COMPLEMENT_CACHE[n] = Q
    return _COMPLEMENT_CACHE[n]


def diagonal_constraint_rows(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Rows of the linear conditions B(x ^ v_a, x ^ v_b) = 0, a < b.

    ``V`` holds, for each point, an orthonormal tangent frame (rows) in which
    the Killing tensor must be diagonal.
    """
    n = V.shape[1]
    W = wedge(X[:, None, :], V)  # (P, n, N)
    rows = [_sym_outer_coords(W[:, a], W[:, b]) for a, b in combinations(range(n), 2)]
    if not rows:
        return np.zeros((0, sym_coords(np.zeros((W.shape[2], W.shape[2]))).shape[0]))
    return np.concatenate(rows, axis=0)


@dataclass(frozen=True, eq=False)
class StackelSystem:
    """An n-dimensional space of forms containing the metric, stored as a basis."""

    n: int
    basis: tuple[BivectorForm, ...]
    contains_metric: bool
    metric_residual: float = 0.0
    spectrum: tuple[float, ...] = ()
    gap_ratio: float = float("inf")

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(as_form(b) for b in self.basis))
        if not self.basis:
            raise ValueError("empty basis")
        if any(b.n != self.n for b in self.basis):
            raise ValueError("basis forms must all live on S^n")

    def coords(self) -> np.ndarray:
        """Basis in Frobenius-orthonormal symmetric coordinates, shape (k, M)."""
        return np.stack([sym_coords(b.matrix()) for b in self.basis])

    def min_singular_value(self) -> float:
        return float(np.linalg.svd(self.coords(), compute_uv=False).min())

    def metric_distance(self) -> float:
        """Distance of the unit-normalized identity form from the span."""
        N = num_pairs(self.n + 1)
        iota = sym_coords(np.eye(N)) / np.sqrt(N)
        Qb, _ = np.linalg.qr(self.coords().T)
        return float(np.linalg.norm(iota - Qb @ (Qb.T @ iota)))

    def check_invariants(self, n_points: int = 10, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> None:
        """Assert independence, metric membership and pointwise commutation."""
        if len(self.basis) != self.n:
            raise StackelError(f"basis has {len(self.basis)} elements, expected {self.n}")
        smin = self.min_singular_value()
        if not smin > tol.rank:
            raise StackelError(f"basis is not independent (smallest singular value {smin:.3e})")
        dist = self.metric_distance()
        if not dist <= tol.metric:
            raise StackelError(f"metric is not in the span (distance {dist:.3e})")
        frames = sample_frames(self.n, n_points, seed)
        worst = _max_commutator(self.basis, frames)
        if not worst < tol.commute:
            raise StackelError(f"basis elements do not commute (residual {worst:.3e})")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "basis": [b.to_dict() for b in self.basis],
            "contains_metric": self.contains_metric,
            "metric_residual": self.metric_residual,
            "spectrum": list(self.spectrum),
            "gap_ratio": self.gap_ratio,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StackelSystem":
        return cls(
            n=int(data["n"]),
            basis=tuple(BivectorForm.from_dict(b) for b in data["basis"]),
            contains_metric=bool(data["contains_metric"]),
            metric_residual=float(data.get("metric_residual", 0.0)),
            spectrum=tuple(float(s) for s in data.get("spectrum", ())),
            gap_ratio=float(data.get("gap_ratio", float("inf"))),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StackelSystem":
        return cls.from_dict(json.loads(text))


def _max_commutator(basis: Sequence[BivectorForm], frames) -> float:
    nonmetric = [b for b in basis if not b.is_metric_multiple()]
    if len(nonmetric) < 2:
        return 0.0
    Ks = [np.asarray(eval_killing_many(b, frames), dtype=float) for b in nonmetric]
    worst = 0.0
    for K1, K2 in combinations(Ks, 2):
        worst = max(worst, float(np.abs(K1 @ K2 - K2 @ K1).max()))
    return worst


def solve_diagonal_space(rows: np.ndarray, n: int, tol_rank: float = DEFAULT_TOL.rank,
                         min_gap: float = 1e3, tol: Tolerances = DEFAULT_TOL) -> StackelSystem:
    """Nullspace of stacked diagonality constraints, modulo forms with zero Killing tensor.

    Null singular values are those below ``tol_rank * sigma_max``; exactly
    ``n`` are required, separated from the rest by at least ``min_gap``.
    The basis is orthonormal with the normalized metric first.
    """
    Q = killing_quotient_basis(n)
    dimq = Q.shape[1]
    N = num_pairs(n + 1)
    if rows.shape[0]:
        A = rows @ Q
        _, s, vt = np.linalg.svd(A, full_matrices=A.shape[0] < dimq)
    else:
        s = np.zeros(0)
        vt = np.eye(dimq)
    spectrum = np.concatenate([s, np.zeros(dimq - s.shape[0])]) if s.shape[0] < dimq else s[:dimq]
    smax = spectrum.max() if spectrum.size and spectrum.max() > 0 else 1.0
    null_mask = spectrum < tol_rank * smax
    k = int(null_mask.sum())
    spec_list = [float(v) for v in spectrum]
    if k != n:
        raise StackelError(f"nullspace has dimension {k}, expected {n}", spec_list)
    nonnull = spectrum[~null_mask]
    first_null = spectrum[null_mask].max() if k else 0.0
    gap_ratio = float("inf") if (not nonnull.size or first_null == 0) else float(nonnull.min() / first_null)
    if nonnull.size and gap_ratio < min_gap:
        raise StackelError(f"ambiguous singular-value gap ({gap_ratio:.3e})", spec_list)
    null_coords = Q @ vt[dimq - k:].T  # (M, k)

    iota = sym_coords(np.eye(N)) / np.sqrt(N)
    proj = null_coords @ (null_coords.T @ iota)
    metric_res = float(np.linalg.norm(iota - proj))
    if metric_res > tol.metric:
        raise StackelError(f"metric is not in the extracted space (distance {metric_res:.3e})", spec_list)
    rest = null_coords - np.outer(iota, iota @ null_coords)
    u, sv, _ = np.linalg.svd(rest, full_matrices=False)
    cols = [iota] + [u[:, i] for i in range(n - 1)]
    basis = tuple(BivectorForm(n, _symmetrized(from_sym_coords(c, N)), exact_mode=False) for c in cols)
    return StackelSystem(n, basis, contains_metric=True, metric_residual=metric_res,
                         spectrum=tuple(spec_list), gap_ratio=gap_ratio)


def _symmetrized(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2


def default_points(n: int) -> int:
    N = num_pairs(n + 1)
    return 3 * N * (N + 1) // 2


def stackel_from_killing(B, n_points: int | None = None, seed: int = 0,
                         tol_rank: float = DEFAULT_TOL.rank,
                         tol: Tolerances = DEFAULT_TOL) -> StackelSystem:
    """The unique Stäckel system containing an integrable Killing tensor with simple eigenvalues.

    Raises :class:`StackelError` if the form fails integrability or
    simplicity at a sampled point, or if the nullspace is not n-dimensional.
    """
    B = as_form(B).to_float()
    n = B.n
    n_points = default_points(n) if n_points is None else n_points
    scale = np.abs(B.matrix()).max()
    if scale == 0:
        raise StackelError("zero form has no simple eigenvalues")
    Bn = BivectorForm(n, B.matrix() / scale, exact_mode=False)
    frames = sample_frames(n, n_points, seed)
    X, F = stack_frames(frames)
    K = eval_killing_many(Bn, frames)
    try:
        w, V = np.linalg.eigh(K)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    if n > 1:
        gaps = np.diff(w, axis=1).min()
        if not gaps > tol.gap:
            raise StackelError(f"precondition failed: eigenvalues not simple (min gap {gaps:.3e})")
    nij = nijenhuis_residuals(Bn, frames).max()
    if not nij <= tol.nijenhuis:
        raise StackelError(f"precondition failed: Nijenhuis residual {nij:.3e}")
    E = np.einsum("pax,pab->pbx", F, V)  # ambient eigenvectors, one per row
    rows = diagonal_constraint_rows(X, E)
    system = solve_diagonal_space(rows, n, tol_rank, tol=tol)
    system.check_invariants(n_points=10, seed=seed + 1, tol=tol)
    return system


def verify_stackel(S: StackelSystem, n_points: int = 20, seed: int = 0,
                   tol_commute: float = DEFAULT_TOL.commute, gap: float = DEFAULT_TOL.gap) -> ResidualReport:
    """Sample frames; report commutation over all basis pairs and Nijenhuis
    residuals of basis elements with simple eigenvalues."""
    frames = sample_frames(S.n, n_points, seed)
    comm = _max_commutator(S.basis, frames)
    kill = 0.0
    nij = np.zeros(3)
    for b in S.basis:
        kill = max(kill, float(killing_residuals(b, frames).max()))
        K = np.asarray(eval_killing_many(b, frames), dtype=float)
        simple = np.ones(len(frames), dtype=bool)
        if S.n > 1:
            simple = np.diff(np.linalg.eigvalsh(K), axis=1).min(axis=1) > gap
        if simple.any():
            res = nijenhuis_residuals(b, [f for f, s in zip(frames, simple) if s])
            nij = np.maximum(nij, res.max(axis=0))
    notes = []
    if len(S.basis) != S.n:
        notes.append(f"basis has {len(S.basis)} elements for n={S.n}")
    passed = bool(kill < tol_commute and comm < tol_commute and nij.max() < tol_commute)
    return ResidualReport(killing_max=kill, nijenhuis_max=[float(v) for v in nij],
                          points_sampled=n_points, seed=seed, commutation_max=comm,
                          tol=tol_commute, passed=passed, notes=notes)


def residual_report(B, n_points: int = 20, seed: int = 0, tol: Tolerances = DEFAULT_TOL,
                    tol_killing: float = 1e-10, tol_nijenhuis: float | None = None) -> tuple[ResidualReport, float]:
    """Killing and Nijenhuis residuals of one form over sampled frames.

    Returns the report and the fraction of points with simple eigenvalues.
    """
    B = as_form(B).to_float()
    tol_nijenhuis = tol.nijenhuis if tol_nijenhuis is None else tol_nijenhuis
    frames = sample_frames(B.n, n_points, seed)
    kill = float(killing_residuals(B, frames).max())
    nij = nijenhuis_residuals(B, frames).max(axis=0)
    K = np.asarray(eval_killing_many(B, frames), dtype=float)
    if B.n > 1:
        simple = float((np.diff(np.linalg.eigvalsh(K), axis=1).min(axis=1) > tol.gap).mean())
    else:
        simple = 1.0
    passed = bool(kill < tol_killing and nij.max() < tol_nijenhuis)
    rep = ResidualReport(killing_max=kill, nijenhuis_max=[float(v) for v in nij],
                         points_sampled=n_points, seed=seed, tol=tol_nijenhuis, passed=passed)
    return rep, simple


# -- normal forms and the permutation action -----------------------------------------

@dataclass(frozen=True)
class NormalFormDiag:
    """Diagonal form with entries ``diag[(i, j)]`` on (e_i ^ e_j)^2, lexicographic pairs."""

    n: int
    diag: tuple

    def __post_init__(self):
        if len(self.diag) != num_pairs(self.n + 1):
            raise ValueError(f"need {num_pairs(self.n + 1)} entries for n={self.n}")
        object.__setattr__(self, "diag", tuple(self.diag))

    @property
    def form(self) -> BivectorForm:
        return BivectorForm.diagonal(self.n, list(self.diag))

    @classmethod
    def from_form(cls, B, tol: float = 1e-10) -> "NormalFormDiag":
        B = as_form(B)
        m = B.B
        off = m - np.diag(m.diagonal())
        if np.abs(np.asarray(off, dtype=float)).max(initial=0.0) > tol:
            raise ValueError("form is not diagonal")
        return cls(B.n, tuple(m.diagonal().tolist()))


def _check_permutation(sigma: Sequence[int], d: int) -> tuple[int, ...]:
    sigma = tuple(int(s) for s in sigma)
    if sorted(sigma) != list(range(d)):
        raise ValueError(f"{sigma} is not a permutation of 0..{d - 1}")
    return sigma


def act_permutation(D: NormalFormDiag, sigma: Sequence[int]) -> NormalFormDiag:
    """Move the entry at pair (i, j) to pair sorted(sigma[i], sigma[j])."""
    d = D.n + 1
    sigma = _check_permutation(sigma, d)
    idx = pair_index(d)
    out = [None] * len(D.diag)
    for (i, j), v in zip(pairs(d), D.diag):
        a, b = sorted((sigma[i], sigma[j]))
        out[idx[(a, b)]] = v
    return NormalFormDiag(D.n, tuple(out))


def compose_permutations(sigma: Sequence[int], tau: Sequence[int]) -> tuple[int, ...]:
    """(sigma tau)(i) = sigma(tau(i))."""
    return tuple(sigma[t] for t in tau)


def permute_system(S: StackelSystem, sigma: Sequence[int], tol: float = 1e-10) -> StackelSystem:
    """Apply :func:`act_permutation` to each (diagonal) basis element."""
    basis = tuple(act_permutation(NormalFormDiag.from_form(b, tol), sigma).form.to_float() for b in S.basis)
    return StackelSystem(S.n, basis, S.contains_metric, S.metric_residual, S.spectrum, S.gap_ratio)


def subspace_angles(S1: StackelSystem, S2: StackelSystem) -> np.ndarray:
    """Principal angles between the spans of two systems."""
    return scipy.linalg.subspace_angles(S1.coords().T, S2.coords().T)
