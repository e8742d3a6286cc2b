from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepcoords import exact


def test_to_fraction_accepts_exact_types():
    assert exact.to_fraction(3) == Fraction(3)
    assert exact.to_fraction("2/7") == Fraction(2, 7)
    assert exact.to_fraction(Fraction(1, 3)) == Fraction(1, 3)


def test_to_fraction_rejects_floats():
    with pytest.raises(TypeError):
        exact.to_fraction(0.5)


def test_rref_small():
    red, piv = exact.rref([[2, 4, 6], [1, 2, 4]], 3)
    assert piv == [0, 2]
    assert red[0] == [1, 2, 0]
    assert red[1] == [0, 0, 1]


small_ints = st.integers(min_value=-4, max_value=4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(small_ints, min_size=5, max_size=5), min_size=1, max_size=6))
def test_nullspace_is_annihilated_and_rank_nullity(rows):
    null = exact.nullspace(rows, 5)
    for v in null:
        for r in rows:
            assert sum(Fraction(a) * b for a, b in zip(r, v)) == 0
    assert exact.rank(rows, 5) + len(null) == 5


def test_solve_roundtrip():
    a = [[2, 1], [1, 3]]
    b = [[1], [2]]
    x = exact.solve(a, b)
    assert exact.matmul(exact.as_matrix(a), x) == exact.as_matrix(b)


@pytest.mark.parametrize("dim", [2, 3, 5])
def test_rational_orthogonal_is_exactly_orthogonal(dim):
    R = exact.random_rational_orthogonal(dim, np.random.default_rng(dim))
    RtR = exact.matmul([list(r) for r in zip(*R)], R)
    assert RtR == [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
