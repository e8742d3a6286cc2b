"""Small exact linear algebra over the rationals.

Matrices are lists of rows of :class:`fractions.Fraction`.  Sizes in this
package stay below a few hundred rows by ~55 columns, where plain Gaussian
elimination on fractions is fast enough and keeps every rank decision exact.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

Matrix = list[list[Fraction]]


def to_fraction(value) -> Fraction:
    """Convert an int, Fraction or "p/q" string to a Fraction.

    Floats are rejected so that inexact data never leaks into exact mode.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def as_matrix(rows: Sequence[Sequence]) -> Matrix:
    return [[to_fraction(v) for v in row] for row in rows]


def rref(rows: Sequence[Sequence], ncols: int | None = None) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and the list of pivot columns."""
    a = [list(r) for r in as_matrix(rows)]
    if ncols is None:
        ncols = len(a[0]) if a else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == len(a):
            break
        piv = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [v * inv for v in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [vi - f * vr for vi, vr in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def rank(rows: Sequence[Sequence], ncols: int | None = None) -> int:
    return len(rref(rows, ncols)[1])


def nullspace(rows: Sequence[Sequence], ncols: int) -> Matrix:
    """Basis of {v : A v = 0}, one basis vector per free column."""
    red, pivots = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(red, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def solve(a: Sequence[Sequence], b: Sequence[Sequence]) -> Matrix:
    """Solve A X = B for square invertible A."""
    n = len(a)
    aug = [list(ra) + list(rb) for ra, rb in zip(as_matrix(a), as_matrix(b))]
    red, pivots = rref(aug, n)
    if pivots != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in red]


def matmul(a: Matrix, b: Matrix) -> Matrix:
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in zip(*b)] for row in a]


def cayley_orthogonal(skew: Sequence[Sequence]) -> Matrix:
    """Rational orthogonal matrix (I - S)(I + S)^-1 from a skew-symmetric S."""
    s = as_matrix(skew)
    n = len(s)
    for i in range(n):
        for j in range(n):
            if s[i][j] != -s[j][i]:
                raise ValueError("matrix is not skew-symmetric")
    eye = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    minus = [[eye[i][j] - s[i][j] for j in range(n)] for i in range(n)]
    plus = [[eye[i][j] + s[i][j] for j in range(n)] for i in range(n)]
    # (I - S) and (I + S)^-1 commute, so solve (I + S) R = (I - S).
    return solve(plus, minus)


def random_rational_orthogonal(dim: int, rng: np.random.Generator, bound: int = 2) -> Matrix:
    """Cayley transform of a random small-integer skew matrix."""
    s = [[Fraction(0)] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            v = int(rng.integers(-bound, bound + 1))
            s[i][j] = Fraction(v)
            s[j][i] = Fraction(-v)
    return cayley_orthogonal(s)
