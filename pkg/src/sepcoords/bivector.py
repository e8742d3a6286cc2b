"""Bivectors on R^{n+1}, symmetric forms on so(n+1) and the Killing tensors they induce.

A symmetric form ``B`` on so(n+1) defines a Killing tensor on the unit sphere
S^n by ``K_x(u, v) = B(x ^ u, x ^ v)``.  Pairs ``(i, j)`` with ``i < j`` are
flattened lexicographically, ``(0,1), (0,2), ..., (0,n), (1,2), ...``, and the
basis ``e_i ^ e_j`` is orthonormal for the inner product
``<a^b, c^d> = <a,c><b,d> - <a,d><b,c>``, so the identity form is the metric.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Iterable, Sequence

import numpy as np

from . import exact, kernels
from .kernels import pair_arrays, wedge_batch


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances shared by the verification routines.

    ``unit``: unit-norm / orthonormality checks; ``rank``: relative
    singular-value cutoff; ``commute``: commutation and verdict threshold;
    ``nijenhuis``: precondition threshold on normalized forms; ``gap``:
    eigenvalue separation; ``gap_min``: minimum spacing of elliptic
    parameters; ``metric``: distance of the metric from an extracted span.
    """

    unit: float = 1e-12
    rank: float = 1e-8
    commute: float = 1e-9
    nijenhuis: float = 1e-8
    gap: float = 1e-8
    gap_min: float = 1e-6
    metric: float = 1e-10


DEFAULT_TOL = Tolerances()


def num_pairs(d: int) -> int:
    return d * (d - 1) // 2


def pairs(d: int) -> list[tuple[int, int]]:
    """Lexicographic list of index pairs (i, j), i < j, for ambient dimension d."""
    return list(combinations(range(d), 2))


def pair_index(d: int) -> dict[tuple[int, int], int]:
    return {p: k for k, p in enumerate(pairs(d))}


def ambient_dim_from_pairs(N: int) -> int:
    d = int(round((1 + (1 + 8 * N) ** 0.5) / 2))
    if num_pairs(d) != N:
        raise ValueError(f"{N} is not a triangular number of pairs")
    return d


def wedge(x, u) -> np.ndarray:
    """Components x_i u_j - x_j u_i of x ^ u, lexicographic in (i, j).

    Broadcasts over leading axes; object arrays of Fractions stay exact.
    """
    x = np.asarray(x)
    u = np.asarray(u)
    if x.shape[-1] != u.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {u.shape[-1]}")
    if x.shape[-1] < 2:
        raise ValueError("ambient dimension must be at least 2")
    return wedge_batch(x, u)


def _as_exact_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    flat = [exact.to_fraction(v) for v in arr.ravel()]
    return np.array(flat, dtype=object).reshape(arr.shape)


def _is_exact_array(a: np.ndarray) -> bool:
    return a.dtype == object


class BivectorForm:
    """Symmetric bilinear form on so(n+1) in the lexicographic pair basis.

    Float forms hold a float64 matrix; exact forms hold Fractions in an
    object array.  Instances are immutable.
    """

    __slots__ = ("n", "B")

    def __init__(self, n: int, B, exact_mode: bool | None = None):
        n = int(n)
        if n < 1:
            raise ValueError("sphere dimension n must be >= 1")
        N = num_pairs(n + 1)
        raw = np.asarray(B)
        if exact_mode is None:
            exact_mode = raw.dtype == object or raw.dtype.kind in "iu"
        arr = _as_exact_array(raw) if exact_mode else np.array(raw, dtype=np.float64)
        if arr.shape != (N, N):
            raise ValueError(f"expected a {N}x{N} matrix for n={n}, got {arr.shape}")
        if exact_mode:
            if any(arr[i, j] != arr[j, i] for i in range(N) for j in range(i + 1, N)):
                raise ValueError("form is not symmetric")
        else:
            if not np.all(np.isfinite(arr)):
                raise ValueError("form has non-finite entries")
            if not np.array_equal(arr, arr.T):
                raise ValueError("form is not symmetric")
        arr.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "B", arr)

    def __setattr__(self, name, value):
        raise AttributeError("BivectorForm is immutable")

    @property
    def exact(self) -> bool:
        return _is_exact_array(self.B)

    @property
    def N(self) -> int:
        return self.B.shape[0]

    @classmethod
    def identity(cls, n: int, exact: bool = False) -> "BivectorForm":
        N = num_pairs(n + 1)
        if exact:
            return cls(n, np.array([[Fraction(int(i == j)) for j in range(N)] for i in range(N)], dtype=object))
        return cls(n, np.eye(N))

    @classmethod
    def zero(cls, n: int, exact: bool = False) -> "BivectorForm":
        N = num_pairs(n + 1)
        if exact:
            return cls(n, np.full((N, N), Fraction(0), dtype=object))
        return cls(n, np.zeros((N, N)))

    @classmethod
    def diagonal(cls, n: int, entries: Sequence) -> "BivectorForm":
        N = num_pairs(n + 1)
        if len(entries) != N:
            raise ValueError(f"need {N} diagonal entries for n={n}")
        if all(isinstance(v, (int, Fraction, np.integer)) for v in entries):
            m = np.full((N, N), Fraction(0), dtype=object)
            for k, v in enumerate(entries):
                m[k, k] = Fraction(v)
            return cls(n, m)
        return cls(n, np.diag(np.asarray(entries, dtype=float)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator | int | None = None) -> "BivectorForm":
        """Generic symmetric form with standard normal entries."""
        rng = np.random.default_rng(rng)
        N = num_pairs(n + 1)
        a = rng.standard_normal((N, N))
        return cls(n, (a + a.T) / 2)

    def to_float(self) -> "BivectorForm":
        if not self.exact:
            return self
        return BivectorForm(self.n, self.B.astype(float), exact_mode=False)

    def matrix(self) -> np.ndarray:
        """Float64 copy of the matrix."""
        return np.array(self.B, dtype=float)

    def is_metric_multiple(self) -> bool:
        """True when B is exactly c * identity."""
        d = self.B.diagonal()
        off = self.B - np.diag(d)
        return bool(np.all(off == 0) and np.all(d == d[0]))

    def _combine(self, other: "BivectorForm", sign: int) -> "BivectorForm":
        if not isinstance(other, BivectorForm):
            return NotImplemented
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        if self.exact and other.exact:
            return BivectorForm(self.n, self.B + sign * other.B)
        return BivectorForm(self.n, self.matrix() + sign * other.matrix(), exact_mode=False)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __mul__(self, c):
        if isinstance(c, (int, Fraction)) and self.exact:
            return BivectorForm(self.n, self.B * Fraction(c))
        if isinstance(c, (int, float, np.floating, np.integer, Fraction)):
            return BivectorForm(self.n, self.matrix() * float(c), exact_mode=False)
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, BivectorForm):
            return NotImplemented
        return (self.n == other.n and self.exact == other.exact
                and bool(np.all(self.B == other.B)))

    def __hash__(self):
        return hash((self.n, self.exact, tuple(self.B[np.triu_indices(self.N)].tolist())))

    def __repr__(self):
        return f"BivectorForm(n={self.n}, exact={self.exact})"

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        iu = np.triu_indices(self.N)
        vals = self.B[iu]
        if self.exact:
            entries = [str(v) for v in vals]
        else:
            entries = [float(v) for v in vals]
        return {"n": self.n, "mode": "exact" if self.exact else "float", "entries": entries}

    @classmethod
    def from_dict(cls, data: dict) -> "BivectorForm":
        try:
            n = int(data["n"])
            mode = data["mode"]
            entries = list(data["entries"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed BivectorForm JSON: {exc}") from exc
        if mode not in ("exact", "float"):
            raise ValueError(f"unknown mode {mode!r}")
        N = num_pairs(n + 1)
        if len(entries) != N * (N + 1) // 2:
            raise ValueError(f"expected {N * (N + 1) // 2} entries for n={n}, got {len(entries)}")
        iu = np.triu_indices(N)
        if mode == "exact":
            m = np.full((N, N), Fraction(0), dtype=object)
            vals = [exact.to_fraction(v) for v in entries]
        else:
            m = np.zeros((N, N))
            vals = [float(v) for v in entries]
        for (i, j), v in zip(zip(*iu), vals):
            m[i, j] = v
            m[j, i] = v
        return cls(n, m, exact_mode=(mode == "exact"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BivectorForm":
        return cls.from_dict(json.loads(text))


def as_form(obj) -> BivectorForm:
    """Accept a BivectorForm or anything exposing ``.form`` (e.g. NormalFormDiag)."""
    if isinstance(obj, BivectorForm):
        return obj
    form = getattr(obj, "form", None)
    if isinstance(form, BivectorForm):
        return form
    raise TypeError(f"expected a BivectorForm, got {type(obj).__name__}")


@dataclass(frozen=True, eq=False)
class PointFrame:
    """A unit vector x in R^{n+1} with an orthonormal tangent frame (rows of ``frame``)."""

    x: np.ndarray
    frame: np.ndarray
    tol_unit: float = DEFAULT_TOL.unit

    def __post_init__(self):
        x = np.asarray(self.x)
        f = np.asarray(self.frame)
        if x.dtype != object:
            x = x.astype(float)
            f = f.astype(float)
        if x.ndim != 1 or x.shape[0] < 2:
            raise ValueError("x must be a vector of dimension >= 2")
        d = x.shape[0]
        if f.shape != (d - 1, d):
            raise ValueError(f"frame must have shape {(d - 1, d)}, got {f.shape}")
        gram = np.vstack([x[None, :], f]) @ np.vstack([x[None, :], f]).T
        if x.dtype == object:
            ok = all(gram[i, j] == int(i == j) for i in range(d) for j in range(d))
        else:
            ok = bool(np.all(np.isfinite(gram))) and np.max(np.abs(gram - np.eye(d))) <= self.tol_unit
        if not ok:
            raise ValueError("x must be a unit vector and the frame orthonormal and tangent")
        x.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "frame", f)

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    def transformed(self, R) -> "PointFrame":
        R = np.asarray(R)
        return PointFrame(R @ self.x, self.frame @ R.T)


def _unit_x(x, tol: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError("x must be a vector of dimension >= 2")
    if abs(x @ x - 1.0) > tol:
        raise ValueError("x is not a unit vector")
    return x


def orthonormal_frame(x, seed: int, tol: Tolerances = DEFAULT_TOL) -> PointFrame:
    """Seeded orthonormal tangent frame at the unit vector ``x``.

    Random ambient vectors are appended to x and orthonormalized by a
    Householder QR; degenerate draws are redrawn.
    """
    x = _unit_x(x, tol.unit)
    d = x.shape[0]
    rng = np.random.default_rng(seed)
    for _ in range(32):
        A = np.column_stack([x, rng.standard_normal((d, d - 1))])
        q, r = np.linalg.qr(A)
        if np.min(np.abs(np.diag(r))) < 1e-6:
            continue
        q = q * np.sign(np.diag(r))
        frame = q[:, 1:].T
        frame = frame - np.outer(frame @ x, x)
        return PointFrame(x, frame, tol_unit=tol.unit)
    raise RuntimeError("orthonormal_frame: 32 degenerate draws in a row")


def random_point(n: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.standard_normal(n + 1)
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            return v / nrm


def sample_frames(n: int, count: int, seed: int) -> list[PointFrame]:
    """``count`` seeded random points of S^n with orthonormal frames."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        x = random_point(n, rng)
        out.append(orthonormal_frame(x, int(rng.integers(2**63 - 1))))
    return out


def rational_frame(n: int, seed: int) -> PointFrame:
    """Exact rational point and frame: the columns of a Cayley orthogonal matrix."""
    R = exact.random_rational_orthogonal(n + 1, np.random.default_rng(seed))
    cols = np.array(R, dtype=object).T
    return PointFrame(cols[0], cols[1:])


def stack_frames(frames: Iterable[PointFrame]) -> tuple[np.ndarray, np.ndarray]:
    frames = list(frames)
    if not frames:
        raise ValueError("no frames given")
    X = np.stack([p.x for p in frames])
    F = np.stack([p.frame for p in frames])
    return X, F


def _check_dims(B: BivectorForm, p: PointFrame) -> None:
    if p.x.shape[0] != B.n + 1:
        raise ValueError(f"dimension mismatch: form on S^{B.n}, point in R^{p.x.shape[0]}")


def _batch_args(B: BivectorForm, frames):
    if isinstance(frames, PointFrame):
        frames = [frames]
    X, F = stack_frames(frames)
    if X.shape[1] != B.n + 1:
        raise ValueError(f"dimension mismatch: form on S^{B.n}, points in R^{X.shape[1]}")
    Bm = B.B
    if X.dtype == object and not B.exact:
        X = X.astype(float)
        F = F.astype(float)
    elif X.dtype != object and B.exact:
        Bm = B.matrix()
    return Bm, X, F


def eval_killing_many(B: BivectorForm, frames, backend: str | None = None) -> np.ndarray:
    """K[p, a, b] = B(x ^ f_a, x ^ f_b) for every frame; shape (P, n, n)."""
    Bm, X, F = _batch_args(B, frames)
    return kernels.killing(Bm, X, F, backend)


def eval_nabla_killing_many(B: BivectorForm, frames, backend: str | None = None) -> np.ndarray:
    Bm, X, F = _batch_args(B, frames)
    return kernels.nabla(Bm, X, F, backend)


def eval_killing(B: BivectorForm, p: PointFrame) -> np.ndarray:
    """Killing tensor components K_ab = B(x ^ f_a, x ^ f_b) in the frame of ``p``."""
    B = as_form(B)
    _check_dims(B, p)
    return eval_killing_many(B, [p])[0]


def eval_nabla_killing(B: BivectorForm, p: PointFrame) -> np.ndarray:
    """Covariant derivative (nabla_{f_c} K)(f_a, f_b), indexed [c, a, b].

    Tangent vectors are extended by projection u(y) = u - <u,y> y, which is
    parallel at x, giving B(f_c ^ f_a, x ^ f_b) + B(x ^ f_a, f_c ^ f_b).
    """
    B = as_form(B)
    _check_dims(B, p)
    return eval_nabla_killing_many(B, [p])[0]


def transported_frame(p: PointFrame, c: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Point and parallel-transported frame after moving angle t along the geodesic towards f_c."""
    x = p.x.astype(float)
    fc = p.frame[c].astype(float)
    y = np.cos(t) * x + np.sin(t) * fc
    vel = -np.sin(t) * x + np.cos(t) * fc
    f = p.frame.astype(float)
    coef = f @ fc
    return y, f - np.outer(coef, fc) + np.outer(coef, vel)


def eval_nabla_killing_fd(B: BivectorForm, p: PointFrame, h: float = 1e-5) -> np.ndarray:
    """Finite-difference covariant derivative: central differences of K along
    great circles, using parallel-transported frames.  Independent of the
    analytic formula in :func:`eval_nabla_killing`."""
    B = as_form(B).to_float()
    _check_dims(B, p)
    n = p.n
    Bm = B.matrix()
    out = np.empty((n, n, n))
    for c in range(n):
        vals = []
        for t in (h, -h):
            y, f = transported_frame(p, c, t)
            wy = wedge(y[None, :], f)
            vals.append(wy @ Bm @ wy.T)
        out[c] = (vals[0] - vals[1]) / (2 * h)
    return out


def lambda2(R) -> np.ndarray:
    """Induced action of a linear map R on bivectors: (R a) ^ (R b) = L (a ^ b)."""
    R = np.asarray(R)
    d = R.shape[0]
    i, j = pair_arrays(d)
    return R[np.ix_(i, i)] * R[np.ix_(j, j)] - R[np.ix_(i, j)] * R[np.ix_(j, i)]


def act_isometry(B: BivectorForm, R, tol: Tolerances = DEFAULT_TOL) -> BivectorForm:
    """Push a form forward by the orthogonal map R: B'(w, z) = B(R^-1 w, R^-1 z)."""
    B = as_form(B)
    R = np.asarray(R)
    d = B.n + 1
    if R.shape != (d, d):
        raise ValueError(f"R must be {d}x{d}")
    if R.dtype == object:
        ok = bool(np.all(R.T @ R == np.eye(d, dtype=int)))
    else:
        R = R.astype(float)
        ok = np.max(np.abs(R.T @ R - np.eye(d))) <= tol.unit * 10
    if not ok:
        raise ValueError("R is not orthogonal")
    M = lambda2(R.T)
    if B.exact and R.dtype == object:
        return BivectorForm(B.n, M.T @ B.B @ M)
    Mf = np.asarray(M, dtype=float)
    out = Mf.T @ B.matrix() @ Mf
    return BivectorForm(B.n, (out + out.T) / 2, exact_mode=False)


def random_orthogonal(d: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def permutation_matrix(sigma: Sequence[int]) -> np.ndarray:
    """Orthogonal matrix P with P e_i = e_{sigma[i]}."""
    d = len(sigma)
    P = np.zeros((d, d))
    P[list(sigma), range(d)] = 1.0
    return P


# -- the kernel of the evaluation map ----------------------------------------

def plucker_forms(n: int) -> list[BivectorForm]:
    """Exact integer forms B(w, z) = coefficient of e_i^e_j^e_k^e_l in w ^ z.

    They vanish on every pair x^u, x^v, so they induce the zero Killing
    tensor; there are C(n+1, 4) of them.
    """
    d = n + 1
    idx = pair_index(d)
    N = len(idx)
    forms = []
    for i, j, k, l in combinations(range(d), 4):
        m = np.full((N, N), Fraction(0), dtype=object)
        # w^z on e_ijkl = w_ij z_kl - w_ik z_jl + w_il z_jk + w_jk z_il - w_jl z_ik + w_kl z_ij
        for (a, b, s) in (((i, j), (k, l), 1), ((i, k), (j, l), -1), ((i, l), (j, k), 1)):
            p, q = idx[a], idx[b]
            m[p, q] += Fraction(s)
            m[q, p] += Fraction(s)
        forms.append(BivectorForm(n, m))
    return forms


def killing_dimension_exact(n: int, seed: int = 0) -> tuple[int, list[BivectorForm]]:
    """Exact rank of the evaluation map S^2 so(n+1) -> Killing tensors and its kernel.

    The map is sampled at rational points with rational orthonormal frames;
    returns (dimension of the image, exact kernel basis).  The image
    dimension is a lower bound for the true one and stabilizes once enough
    points are used.
    """
    d = n + 1
    N = num_pairs(d)
    iu = list(zip(*np.triu_indices(N)))
    M = len(iu)
    per_point = n * (n + 1) // 2
    n_points = -(-M // max(per_point, 1)) + 4
    rows = []
    for k in range(n_points):
        p = rational_frame(n, seed + k)
        w = wedge(p.x[None, :], p.frame)
        for a in range(n):
            for b in range(a, n):
                row = []
                for (s, t) in iu:
                    v = w[a, s] * w[b, t]
                    if s != t:
                        v += w[a, t] * w[b, s]
                    row.append(v)
                rows.append(row)
    red, piv = exact.rref(rows, M)
    null = exact.nullspace(red, M)
    kernel = []
    for vec in null:
        m = np.full((N, N), Fraction(0), dtype=object)
        for (s, t), v in zip(iu, vec):
            m[s, t] = v
            m[t, s] = v
        kernel.append(BivectorForm(n, m))
    return len(piv), kernel


def killing_dimension_formula(n: int) -> int:
    """Dimension of the space of Killing 2-tensors on S^n."""
    return n * (n + 1) ** 2 * (n + 2) // 12


def plucker_count(n: int) -> int:
    return comb(n + 1, 4)
