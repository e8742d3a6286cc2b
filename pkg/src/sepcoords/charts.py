"""Coordinate charts on S^n built from rooted planar trees.

Each internal node carries an elliptic block: for k children with
parameters e_0 < ... < e_{k-1} the block maps interlacing coordinates
e_0 < u_1 < e_1 < ... < u_{k-1} < e_{k-1} to the positive orthant of S^{k-1} by

    x_i^2 = prod_m (e_i - u_m) / prod_{j != i} (e_i - e_j).

Two-child nodes use the angle chart (cos t, sin t), 0 < t < pi/2.  Blocks are
combined with the sphere composition y o (x_1, ..., x_k) = (y_1 x_1, ..., y_k x_k),
coordinates ordered node-first in pre-order, and leaves mapped to ambient
axes left to right unless ``leaf_axes`` says otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .bivector import DEFAULT_TOL, BivectorForm, Tolerances, num_pairs, pairs, sample_frames
from .integrability import (
    NormalFormDiag,
    StackelError,
    StackelSystem,
    default_points,
    diagonal_constraint_rows,
    eigen_simplicity,
    nijenhuis_residuals,
    solve_diagonal_space,
    verify_stackel,
)
from .bivector import eval_killing_many
from .trees import LEAF, Tree, graft, parse_tree, reverse_at

Path = tuple[int, ...]


# -- parameters ---------------------------------------------------------------------

@dataclass(frozen=True)
class EllipticParams:
    """Strictly increasing parameters of one elliptic block (k = len(e) children)."""

    e: tuple[float, ...]
    gap_min: float = DEFAULT_TOL.gap_min

    def __post_init__(self):
        e = tuple(float(v) for v in self.e)
        if len(e) < 2:
            raise ValueError("an elliptic block needs at least two parameters")
        if not all(np.isfinite(e)):
            raise ValueError("parameters must be finite")
        gaps = np.diff(e)
        if not np.all(gaps > 0):
            raise ValueError(f"parameters must be strictly increasing: {e}")
        span = e[-1] - e[0]
        if np.min(gaps) / span < self.gap_min:
            raise ValueError(f"parameters closer than gap_min={self.gap_min}: {e}")
        object.__setattr__(self, "e", e)

    @property
    def k(self) -> int:
        return len(self.e)

    @property
    def moduli(self) -> int:
        return self.k - 2

    @classmethod
    def for_arity(cls, k: int, values: Sequence[float] | None = None, gap_min: float = DEFAULT_TOL.gap_min) -> "EllipticParams":
        """Normalized parameters (e[0] = 0, e[-1] = 1) for a k-child node.

        ``values`` may be the full list of k increasing numbers (affinely
        normalized here), or empty/None for k = 2; None for k >= 3 gives
        equispaced parameters.
        """
        if k < 2:
            raise ValueError("arity must be >= 2")
        if k == 2:
            if values:
                raise ValueError("two-child nodes carry no parameters")
            return cls((0.0, 1.0), gap_min)
        if values is None:
            return cls(tuple(np.linspace(0.0, 1.0, k)), gap_min)
        values = [float(v) for v in values]
        if len(values) != k:
            raise ValueError(f"node with {k} children needs {k} parameters, got {len(values)}")
        return cls(tuple(values), gap_min).normalized()

    def normalized(self) -> "EllipticParams":
        e = np.asarray(self.e)
        out = (e - e[0]) / (e[-1] - e[0])
        out[0], out[-1] = 0.0, 1.0
        return EllipticParams(tuple(out), self.gap_min)

    def mirrored(self) -> "EllipticParams":
        """Parameters of the reversed block: e -> (e_0 + e_last) - reversed(e)."""
        e = np.asarray(self.e)
        return EllipticParams(tuple((e[0] + e[-1]) - e[::-1]), self.gap_min)


# -- charts ------------------------------------------------------------------------------

class Chart:
    """A map from a box of coordinates into S^n (as a subset of R^{n+1}).

    ``fmap`` takes a (P, n) array and returns (P, dim+1); ``fjac`` returns the
    (P, dim+1, n) Jacobian.  Calls accept a single point or a batch.  ``dim``
    defaults to ``n``; a smaller coordinate count is only useful for fixed
    points fed into :func:`sphere_compose`.
    """

    def __init__(self, n: int, domain: Sequence[tuple[float, float]],
                 fmap: Callable[[np.ndarray], np.ndarray],
                 fjac: Callable[[np.ndarray], np.ndarray] | None = None,
                 provenance: object = None, label: str = "", dim: int | None = None):
        if len(domain) != n:
            raise ValueError("domain must have one interval per coordinate")
        self.n = n
        self.dim = n if dim is None else dim
        self.domain = tuple((float(a), float(b)) for a, b in domain)
        self._map = fmap
        self._jac = fjac
        self.provenance = provenance
        self.label = label

    def __repr__(self):
        return f"Chart(n={self.n}, {self.label or 'custom'})"

    def _batch(self, u) -> tuple[np.ndarray, bool]:
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        u = u.reshape(1, -1) if single else u
        if u.shape[1] != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {u.shape[1]}")
        return u, single

    def check_domain(self, u: np.ndarray) -> None:
        for c, (a, b) in enumerate(self.domain):
            if np.any(u[:, c] <= a) or np.any(u[:, c] >= b):
                raise ValueError(f"coordinate {c} outside the open interval ({a}, {b})")

    def __call__(self, u, check: bool = True) -> np.ndarray:
        u, single = self._batch(u)
        if check:
            self.check_domain(u)
        x = self._map(u)
        return x[0] if single else x

    def jacobian(self, u, check: bool = True) -> np.ndarray:
        if self._jac is None:
            raise NotImplementedError("chart has no analytic Jacobian")
        u, single = self._batch(u)
        if check:
            self.check_domain(u)
        J = self._jac(u)
        return J[0] if single else J

    def from_unit(self, t) -> np.ndarray:
        """Map points of the unit cube (0,1)^n onto the coordinate box."""
        t = np.asarray(t, dtype=float)
        lo = np.array([a for a, _ in self.domain])
        hi = np.array([b for _, b in self.domain])
        return lo + t * (hi - lo)

    def sample(self, n_points: int, seed: int, margin: float = 0.02, max_retries: int = 32) -> np.ndarray:
        """Uniform interior samples, redrawing any that fall within ``margin``
        (relative to interval length) of the boundary."""
        rng = np.random.default_rng(seed)
        out = np.empty((n_points, self.n))
        for p in range(n_points):
            for _ in range(max_retries):
                t = rng.random(self.n)
                if np.all((t > margin) & (t < 1 - margin)):
                    out[p] = self.from_unit(t)
                    break
            else:
                raise RuntimeError("could not draw an interior sample point")
        return out

    def act(self, pi: Sequence[int]) -> "Chart":
        """Permute ambient axes: output axis pi[i] receives component i."""
        pi = list(pi)
        if sorted(pi) != list(range(self.dim + 1)):
            raise ValueError("not a permutation of the ambient axes")

        def fmap(u):
            x = self._map(u)
            out = np.empty_like(x)
            out[:, pi] = x
            return out

        fjac = None
        if self._jac is not None:
            def fjac(u):
                J = self._jac(u)
                out = np.empty_like(J)
                out[:, pi, :] = J
                return out

        return Chart(self.n, self.domain, fmap, fjac, self.provenance, self.label, self.dim)

    def reorder_coords(self, order: Sequence[int]) -> "Chart":
        """Chart whose coordinate c is the old coordinate order[c]."""
        order = list(order)
        inv = np.argsort(order)
        base = self

        def fmap(u):
            return base._map(u[:, inv])

        fjac = None
        if self._jac is not None:
            def fjac(u):
                return base._jac(u[:, inv])[:, :, order]

        return Chart(self.n, [self.domain[o] for o in order], fmap, fjac, self.provenance, self.label, self.dim)


def point_chart() -> Chart:
    """The one-point chart of S^0: no coordinates, value (1,)."""
    return Chart(0, (), lambda u: np.ones((u.shape[0], 1)), lambda u: np.zeros((u.shape[0], 1, 0)), label="point")


def angle_chart() -> Chart:
    """Quarter circle (cos t, sin t), 0 < t < pi/2."""
    def fmap(u):
        t = u[:, 0]
        return np.stack([np.cos(t), np.sin(t)], axis=1)

    def fjac(u):
        t = u[:, 0]
        return np.stack([-np.sin(t), np.cos(t)], axis=1)[:, :, None]

    return Chart(1, [(0.0, np.pi / 2)], fmap, fjac, label="angle")


def elliptic_squares(e: np.ndarray, u: np.ndarray) -> np.ndarray:
    """x_i^2 from the product formula, shape (P, k)."""
    k = e.shape[0]
    num = np.prod(e[None, :, None] - u[:, None, :], axis=2)
    diff = e[:, None] - e[None, :]
    np.fill_diagonal(diff, 1.0)
    den = np.prod(diff, axis=1)
    return num / den[None, :]


def elliptic_chart(e) -> Chart:
    """Elliptic coordinates on S^{k-1} with parameters e (k >= 2); k = 2 gives the angle chart."""
    if isinstance(e, EllipticParams):
        e = e.e
    e = np.asarray([float(v) for v in e])
    k = e.shape[0]
    if k < 2:
        raise ValueError("need at least two parameters")
    if not np.all(np.diff(e) > 0):
        raise ValueError("parameters must be strictly increasing (no coincident values)")
    if k == 2:
        return angle_chart()

    def fmap(u):
        return np.sqrt(np.maximum(elliptic_squares(e, u), 0.0))

    def fjac(u):
        x = fmap(u)
        return -x[:, :, None] / (2.0 * (e[None, :, None] - u[:, None, :]))

    domain = [(e[m], e[m + 1]) for m in range(k - 1)]
    return Chart(k - 1, domain, fmap, fjac, provenance=tuple(e), label=f"elliptic{tuple(e.tolist())}")


def elliptic_coordinates_of(x, e) -> np.ndarray:
    """Recover elliptic coordinates: the roots of sum_i x_i^2 / (e_i - lam) = 0.

    Uses the polynomial sum_i x_i^2 prod_{j != i} (e_j - lam), independent of
    the chart formula.
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    P = np.polynomial.Polynomial
    poly = P([0.0])
    for i in range(len(e)):
        term = P([x[i] ** 2])
        for j in range(len(e)):
            if j != i:
                term = term * P([e[j], -1.0])
        poly = poly + term
    roots = poly.roots()
    return np.sort(roots.real)


def sphere_compose(y: Chart, xs: Sequence[Chart]) -> Chart:
    """Chart of (y_1 x_1, ..., y_k x_k); coordinates (u_y, u_1, ..., u_k)."""
    xs = list(xs)
    k = len(xs)
    if y.dim + 1 != k:
        raise ValueError(f"arity mismatch: outer chart lives in R^{y.dim + 1}, got {k} inner charts")
    dims = [x.dim + 1 for x in xs]
    coord_sizes = [y.n] + [x.n for x in xs]
    coord_off = np.cumsum([0] + coord_sizes)
    amb_off = np.cumsum([0] + dims)
    total = int(coord_off[-1])
    dim_out = sum(dims) - 1

    def split(u):
        return [u[:, coord_off[i]:coord_off[i + 1]] for i in range(k + 1)]

    def fmap(u):
        parts = split(u)
        Y = y._map(parts[0])
        return np.concatenate([Y[:, i:i + 1] * xs[i]._map(parts[i + 1]) for i in range(k)], axis=1)

    def fjac(u):
        parts = split(u)
        P = u.shape[0]
        Y = y._map(parts[0])
        dY = y._jac(parts[0])
        J = np.zeros((P, dim_out + 1, total))
        for i in range(k):
            Xi = xs[i]._map(parts[i + 1])
            rows = slice(amb_off[i], amb_off[i + 1])
            J[:, rows, :y.n] = dY[:, i, None, :] * Xi[:, :, None]
            J[:, rows, coord_off[i + 1]:coord_off[i + 2]] = Y[:, i, None, None] * xs[i]._jac(parts[i + 1])
        return J

    has_jac = y._jac is not None and all(x._jac is not None for x in xs)
    domain = list(y.domain) + [iv for x in xs for iv in x.domain]
    return Chart(total, domain, fmap, fjac if has_jac else None,
                 label=f"compose({y.label}; {', '.join(x.label for x in xs)})", dim=dim_out)


def spherical_chart(n: int) -> Chart:
    """Textbook spherical coordinates on S^n, coded directly.

    s_1 = (cos t_1, sin t_1), s_{k+1} = (cos t_{k+1} s_k, sin t_{k+1}); all t in (0, pi/2).
    """
    def fmap(u):
        s = np.stack([np.cos(u[:, 0]), np.sin(u[:, 0])], axis=1)
        for k in range(1, n):
            t = u[:, k:k + 1]
            s = np.concatenate([np.cos(t) * s, np.sin(t)], axis=1)
        return s

    return Chart(n, [(0.0, np.pi / 2)] * n, fmap, None, label=f"spherical{n}")


# -- dressed trees ---------------------------------------------------------------------

def parse_path(key: str) -> Path:
    key = key.strip()
    if key in ("", "/", "root"):
        return ()
    try:
        return tuple(int(s) for s in key.replace("/", ".").split("."))
    except ValueError as exc:
        raise ValueError(f"bad node path {key!r}; use dot-separated child indices") from exc


def format_path(path: Path) -> str:
    return ".".join(str(i) for i in path)


@dataclass(frozen=True, eq=False)
class DressedTree:
    """A tree with elliptic parameters on its internal nodes and a leaf-to-axis map."""

    tree: Tree
    params: Mapping[Path, EllipticParams] = field(default_factory=dict)
    leaf_axes: tuple[int, ...] = ()

    def __post_init__(self):
        t = self.tree
        if t.is_leaf:
            raise ValueError("a dressed tree needs at least one internal node")
        internal = {p: s for p, s in t.nodes() if not s.is_leaf}
        params = {}
        for path, s in internal.items():
            given = self.params.get(path)
            if given is None:
                if s.arity > 2:
                    raise ValueError(f"node {format_path(path) or '<root>'} with {s.arity} children needs parameters")
                given = EllipticParams.for_arity(2)
            if given.k != s.arity:
                raise ValueError(f"node {format_path(path) or '<root>'} has {s.arity} children but {given.k} parameters")
            params[path] = given
        extra = set(self.params) - set(internal)
        if extra:
            raise ValueError(f"parameters given for non-internal nodes: {sorted(extra)}")
        axes = tuple(self.leaf_axes) or tuple(range(t.leaves))
        if sorted(axes) != list(range(t.leaves)):
            raise ValueError("leaf_axes must be a permutation of the leaf positions")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "leaf_axes", axes)

    @property
    def n(self) -> int:
        return self.tree.leaves - 1

    @property
    def moduli(self) -> int:
        return sum(p.moduli for p in self.params.values())

    @classmethod
    def make(cls, tree: Tree | str, params: Mapping | None = None, leaf_axes: Sequence[int] = (),
             default: str | None = "equispaced") -> "DressedTree":
        """Build from raw values: params maps a path (tuple or "0.1" string) to k numbers."""
        if isinstance(tree, str):
            tree = parse_tree(tree)
        out = {}
        for key, vals in (params or {}).items():
            path = parse_path(key) if isinstance(key, str) else tuple(key)
            try:
                node = tree.subtree(path)
            except IndexError:
                raise ValueError(f"no node at path {key!r}") from None
            if node.is_leaf:
                raise ValueError(f"path {key!r} is a leaf")
            out[path] = vals if isinstance(vals, EllipticParams) else EllipticParams.for_arity(node.arity, vals)
        if default == "equispaced":
            for path, s in tree.nodes():
                if not s.is_leaf and path not in out:
                    out[path] = EllipticParams.for_arity(s.arity)
        return cls(tree, out, tuple(leaf_axes))

    @classmethod
    def random(cls, tree: Tree, rng: np.random.Generator | int | None = None) -> "DressedTree":
        rng = np.random.default_rng(rng)
        params = {}
        for path, s in tree.nodes():
            if not s.is_leaf and s.arity > 2:
                while True:
                    inner = np.sort(rng.uniform(0.05, 0.95, s.arity - 2))
                    vals = np.concatenate([[0.0], inner, [1.0]])
                    if np.min(np.diff(vals)) > 0.05:
                        break
                params[path] = EllipticParams(tuple(vals))
        return cls.make(tree, params)

    def params_json(self) -> dict[str, list[float]]:
        return {format_path(p): (list(v.e) if v.k > 2 else []) for p, v in sorted(self.params.items())}

    def coordinate_slots(self) -> list[tuple[Path, int]]:
        """(node path, local coordinate index) for each chart coordinate, in order."""
        out = []
        for path, s in self.tree.nodes():
            if not s.is_leaf:
                out.extend((path, i) for i in range(s.arity - 1))
        return out


def chart_from_tree(d: DressedTree) -> Chart:
    """Recursive sphere composition of the elliptic blocks of a dressed tree."""

    def build(path: Path, s: Tree) -> Chart:
        if s.is_leaf:
            return point_chart()
        kids = [build(path + (i,), c) for i, c in enumerate(s.children)]
        return sphere_compose(elliptic_chart(d.params[path]), kids)

    c = build((), d.tree)
    if d.leaf_axes != tuple(range(d.tree.leaves)):
        c = c.act(d.leaf_axes)
    c.provenance = d
    c.label = str(d.tree)
    return c


def graft_dressed(d: DressedTree, subs: Sequence[DressedTree | None]) -> DressedTree:
    """Graft dressed subtrees (None = bare leaf) onto the leaves of ``d``."""
    if d.leaf_axes != tuple(range(d.tree.leaves)):
        raise ValueError("grafting requires the default leaf-axis assignment")
    subs = list(subs)
    trees = [LEAF if s is None else s.tree for s in subs]
    out_tree = graft(d.tree, trees)
    params = dict(d.params)
    for leaf_path, s in zip(d.tree.leaf_paths(), subs):
        if s is None:
            continue
        if s.leaf_axes != tuple(range(s.tree.leaves)):
            raise ValueError("grafting requires the default leaf-axis assignment")
        for p, v in s.params.items():
            params[leaf_path + p] = v
    return DressedTree(out_tree, params)


def mirror_dressed(d: DressedTree, path: Path = (), relabel: bool = True) -> DressedTree:
    """Reverse the children at ``path`` (a dyslectic move), mirroring parameters.

    With ``relabel`` the leaf axes are permuted along, so the chart image and
    coordinate hypersurfaces are unchanged.
    """
    path = tuple(path)
    node = d.tree.subtree(path)
    if node.is_leaf:
        raise ValueError("cannot mirror at a leaf")
    k = node.arity
    new_params = {}
    for p, v in d.params.items():
        if p[:len(path)] == path:
            if len(p) == len(path):
                new_params[p] = v.mirrored()
                continue
            i = p[len(path)]
            p = path + (k - 1 - i,) + p[len(path) + 1:]
        new_params[p] = v
    axes = list(d.leaf_axes)
    if relabel:
        new_to_old = _mirror_order(d.tree, path)
        axes = [d.leaf_axes[o] for o in new_to_old]
    return DressedTree(reverse_at(d.tree, path), new_params, tuple(axes))


def _mirror_order(t: Tree, path: Path) -> list[int]:
    """Leaf positions after reversing the children at ``path``: new position -> old position."""
    leaf_paths = t.leaf_paths()
    k = t.subtree(path).arity
    depth = len(path)
    under = [i for i, lp in enumerate(leaf_paths) if lp[:depth] == path]
    blocks = [[i for i in under if leaf_paths[i][depth] == c] for c in range(k)]
    order = list(range(len(leaf_paths)))
    order[under[0]:under[-1] + 1] = [i for b in reversed(blocks) for i in b]
    return order


def mirror_permutation(d: DressedTree, path: Path = ()) -> tuple[int, ...]:
    """Ambient permutation sigma (old axis -> new axis) carrying the chart of ``d`` to
    the chart of its un-relabelled mirror at ``path``."""
    new_to_old = _mirror_order(d.tree, tuple(path))
    sigma = [0] * len(new_to_old)
    for new, old in enumerate(new_to_old):
        sigma[d.leaf_axes[old]] = d.leaf_axes[new]
    return tuple(sigma)


# -- verification ------------------------------------------------------------------------

@dataclass
class OrthogonalityReport:
    max_offdiag: float
    max_norm_error: float
    min_singular: float
    n_points: int
    seed: int
    tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.max_offdiag < self.tol and self.min_singular > 0

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def fd_jacobian(c: Chart, u: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian (P, n+1, n), step rel_step * interval length."""
    P = u.shape[0]
    J = np.empty((P, c.dim + 1, c.n))
    for i, (a, b) in enumerate(c.domain):
        h = rel_step * (b - a)
        up = u.copy()
        dn = u.copy()
        up[:, i] += h
        dn[:, i] -= h
        J[:, :, i] = (c(up, check=False) - c(dn, check=False)) / (2 * h)
    return J


def verify_orthogonal(c: Chart, n_points: int = 20, seed: int = 0, rel_step: float = 1e-6,
                      margin: float = 0.02, tol: float = 1e-6) -> OrthogonalityReport:
    """Pulled-back metric by finite differences; reports max |G_ij| / sqrt(G_ii G_jj)."""
    if c.n == 0:
        return OrthogonalityReport(0.0, 0.0, 1.0, n_points, seed, tol)
    u = c.sample(n_points, seed, margin)
    x = c(u)
    J = fd_jacobian(c, u, rel_step)
    G = np.einsum("pai,paj->pij", J, J)
    dg = np.sqrt(np.einsum("pii->pi", G))
    ratio = np.abs(G) / (dg[:, :, None] * dg[:, None, :])
    idx = np.arange(c.n)
    ratio[:, idx, idx] = 0.0
    svals = np.linalg.svd(J, compute_uv=False)
    return OrthogonalityReport(
        max_offdiag=float(ratio.max()),
        max_norm_error=float(np.abs(np.einsum("pa,pa->p", x, x) - 1).max()),
        min_singular=float(svals.min()),
        n_points=n_points,
        seed=seed,
        tol=tol,
    )


def chart_frames(c: Chart, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Points and normalized Jacobian columns (as rows), shapes (P, n+1), (P, n, n+1)."""
    X = c(u)
    J = c.jacobian(u)
    V = np.swapaxes(J, 1, 2)
    V = V / np.linalg.norm(V, axis=2, keepdims=True)
    return X, V


def stackel_of_chart(d: DressedTree, n_points: int | None = None, seed: int = 0,
                     tol_rank: float = DEFAULT_TOL.rank, tol: Tolerances = DEFAULT_TOL) -> StackelSystem:
    """All forms whose Killing tensor is diagonal in the chart's coordinate frame."""
    c = chart_from_tree(d)
    rep = verify_orthogonal(c, 8, seed)
    if not rep.passed:
        raise StackelError(f"chart is not orthogonal (off-diagonal {rep.max_offdiag:.3e})")
    n = c.n
    n_points = default_points(n) if n_points is None else n_points
    u = c.sample(n_points, seed)
    X, V = chart_frames(c, u)
    rows = diagonal_constraint_rows(X, V)
    system = solve_diagonal_space(rows, n, tol_rank, tol=tol)
    system.check_invariants(n_points=10, seed=seed + 1, tol=tol)
    report = verify_stackel(system, 10, seed + 2, tol.commute)
    if not report.passed:
        raise StackelError(f"extracted system fails verification: {report.to_dict()}")
    return system


def pullback_offdiag(S: StackelSystem, c: Chart, u: np.ndarray) -> float:
    """Largest off-diagonal entry of any basis member in the normalized coordinate frame."""
    X, V = chart_frames(c, u)
    from .bivector import wedge

    W = wedge(X[:, None, :], V)
    worst = 0.0
    for b in S.basis:
        K = W @ b.matrix() @ np.swapaxes(W, 1, 2)
        idx = np.arange(c.n)
        K[:, idx, idx] = 0.0
        worst = max(worst, float(np.abs(K).max(initial=0.0)))
    return worst


# -- the elliptic Killing tensor ----------------------------------------------------------

def elliptic_form(e: Sequence, validate: bool = True, n_check: int = 8, seed: int = 0,
                  tol: float = 1e-8) -> NormalFormDiag:
    """Diagonal form with entries (e_i + e_j) / 2, the Killing tensor of elliptic coordinates.

    Exact when all parameters are ints or Fractions.  With ``validate``, the
    form is checked at ``n_check`` random points: integrability residuals,
    simple eigenvalues, and eigenvalues equal to (x^T diag(e) x + u_m) / 2
    with u the elliptic coordinates of the point (after normalizing e to
    [0, 1]).  A failed check raises ``AssertionError``.
    """
    vals = list(e)
    if len(vals) < 2:
        raise ValueError("need at least two parameters")
    exact_mode = all(isinstance(v, (int, Fraction, np.integer)) for v in vals)
    if exact_mode:
        vals = [Fraction(v) for v in vals]
    if not all(b > a for a, b in zip(vals, vals[1:])):
        raise ValueError("parameters must be strictly increasing")
    n = len(vals) - 1
    diag = tuple((vals[i] + vals[j]) / 2 for i, j in pairs(n + 1))
    if not exact_mode:
        diag = tuple(float(v) for v in diag)
    D = NormalFormDiag(n, diag)
    if validate:
        _validate_elliptic(vals, n_check, seed, tol)
    return D


def _validate_elliptic(vals, n_check: int, seed: int, tol: float) -> None:
    e = np.asarray([float(v) for v in vals])
    e = (e - e[0]) / (e[-1] - e[0])
    n = len(e) - 1
    B = BivectorForm(n, np.diag([(e[i] + e[j]) / 2 for i, j in pairs(n + 1)]), exact_mode=False)
    frames = sample_frames(n, n_check, seed)
    nij = nijenhuis_residuals(B, frames).max()
    if not nij < tol:
        raise AssertionError(f"elliptic form fails the integrability conditions ({nij:.3e})")
    K = eval_killing_many(B, frames)
    for p, Kp in zip(frames, K):
        if not eigen_simplicity(B, p, 1e-10):
            raise AssertionError("elliptic form has a multiple eigenvalue at a sample point")
        lam = np.linalg.eigvalsh(Kp)
        u = elliptic_coordinates_of(p.x, e)
        expected = np.sort((p.x @ (e * p.x) + u) / 2)
        if not np.allclose(lam, expected, atol=tol, rtol=0):
            raise AssertionError(f"elliptic eigenvalues {lam} do not match coordinates {expected}")


# -- grid lines ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Polyline:
    curve_id: int
    family: int
    level: float
    points: np.ndarray


def emit_gridlines(c: Chart, resolution: int = 64, lines: int = 9) -> list[Polyline]:
    """Coordinate lines of a chart on S^2 as 3D polylines.

    Family i varies coordinate i over its closed interval with the other
    coordinate fixed at ``lines`` equally spaced interior levels;
    curve_id = i * lines + level index.
    """
    if c.n != 2 or c.dim != 2:
        raise ValueError(f"grid lines are only emitted for S^2 charts (got n={c.dim})")
    if resolution < 2 or lines < 1:
        raise ValueError("resolution must be >= 2 and lines >= 1")
    out = []
    for fam in range(2):
        other = 1 - fam
        a, b = c.domain[fam]
        oa, ob = c.domain[other]
        sweep = np.linspace(a, b, resolution)
        for li in range(lines):
            level = oa + (li + 1) * (ob - oa) / (lines + 1)
            u = np.empty((resolution, 2))
            u[:, fam] = sweep
            u[:, other] = level
            out.append(Polyline(fam * lines + li, fam, float(level), c(u, check=False)))
    return out
