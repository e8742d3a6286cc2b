from fractions import Fraction

import numpy as np
import pytest

from sepcoords.bivector import BivectorForm
from sepcoords.charts import (
    Chart,
    DressedTree,
    EllipticParams,
    angle_chart,
    chart_from_tree,
    elliptic_chart,
    elliptic_coordinates_of,
    elliptic_form,
    emit_gridlines,
    graft_dressed,
    mirror_dressed,
    mirror_permutation,
    point_chart,
    pullback_offdiag,
    sphere_compose,
    spherical_chart,
    stackel_of_chart,
    verify_orthogonal,
)
from sepcoords.integrability import StackelError, permute_system, stackel_from_killing, subspace_angles
from sepcoords.trees import LEAF, corolla, left_comb, parse_tree


def const_chart(v):
    v = np.asarray(v, dtype=float)
    return Chart(0, (), lambda u: np.tile(v, (u.shape[0], 1)), lambda u: np.zeros((u.shape[0], v.size, 0)),
                 dim=v.size - 1)


# -- parameters ---------------------------------------------------------------------

def test_params_validation_and_normalization():
    p = EllipticParams.for_arity(4, [2, 4, 6, 10])
    assert p.e == (0.0, 0.25, 0.5, 1.0)
    assert p.moduli == 2
    assert EllipticParams.for_arity(2).e == (0.0, 1.0)
    assert EllipticParams.for_arity(3).e == (0.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        EllipticParams((0.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        EllipticParams((0.0, 1e-9, 1.0))
    with pytest.raises(ValueError):
        EllipticParams.for_arity(2, [0, 1])
    with pytest.raises(ValueError):
        EllipticParams.for_arity(3, [0, 1])


def test_mirrored_params():
    assert EllipticParams((0.0, 0.2, 1.0)).mirrored().e == pytest.approx((0.0, 0.8, 1.0))


# -- elliptic chart -------------------------------------------------------------------

def test_elliptic_example_in_rationals():
    e = [Fraction(v) for v in (0, 1, 4)]
    u = [Fraction(1, 2), Fraction(2)]
    sq = []
    for i in range(3):
        num = (e[i] - u[0]) * (e[i] - u[1])
        den = 1
        for j in range(3):
            if j != i:
                den *= e[i] - e[j]
        sq.append(num / den)
    assert sq == [Fraction(1, 4), Fraction(1, 6), Fraction(7, 12)]
    assert sum(sq) == 1
    x = elliptic_chart((0, 1, 4))([0.5, 2.0])
    np.testing.assert_allclose(x ** 2, [float(s) for s in sq], atol=1e-15)


def test_elliptic_inverse_by_root_finding():
    x = np.sqrt([1 / 4, 1 / 6, 7 / 12])
    np.testing.assert_allclose(elliptic_coordinates_of(x, (0, 1, 4)), [0.5, 2.0], atol=1e-10)


def test_elliptic_inverse_random(rng):
    e = np.array([0.0, 0.3, 0.5, 1.0])
    c = elliptic_chart(e)
    u = c.sample(20, 1)
    for ui, xi in zip(u, c(u)):
        np.testing.assert_allclose(elliptic_coordinates_of(xi, e), ui, atol=1e-10)


def test_elliptic_domain_enforced():
    c = elliptic_chart((0, 1, 4))
    with pytest.raises(ValueError):
        c([1.5, 2.0])
    with pytest.raises(ValueError):
        elliptic_chart((0, 1, 1))
    with pytest.raises(ValueError):
        c([0.5])


def test_k2_is_quarter_circle():
    c = elliptic_chart((0, 1))
    assert c.n == 1 and c.domain == ((0.0, np.pi / 2),)
    np.testing.assert_allclose(c([0.3]), [np.cos(0.3), np.sin(0.3)])


def test_analytic_jacobian_matches_fd():
    from sepcoords.charts import fd_jacobian

    c = chart_from_tree(DressedTree.random(parse_tree("((*,*,*),(*,*))"), 2))
    u = c.sample(5, 0)
    np.testing.assert_allclose(c.jacobian(u), fd_jacobian(c, u), atol=1e-7)


# -- sphere composition -----------------------------------------------------------------

def test_compose_example():
    y = const_chart([0.6, 0.8])
    out = sphere_compose(y, [const_chart([0, 0, 1]), point_chart()])
    np.testing.assert_allclose(out(np.zeros(0)), [0, 0, 0.6, 0.8], atol=1e-15)


def test_compose_arity_mismatch():
    with pytest.raises(ValueError):
        sphere_compose(angle_chart(), [point_chart()])


def test_compose_with_units_is_identity():
    y = elliptic_chart((0, 0.4, 1))
    c = sphere_compose(y, [point_chart()] * 3)
    u = y.sample(10, 0)
    np.testing.assert_allclose(c(u), y(u), atol=1e-15)
    c2 = sphere_compose(point_chart(), [y])
    np.testing.assert_allclose(c2(u), y(u), atol=1e-15)


def test_compose_coordinate_count():
    c = sphere_compose(elliptic_chart((0, 0.5, 1)), [angle_chart(), point_chart(), elliptic_chart((0, 0.2, 0.7, 1))])
    assert c.n == 2 + 1 + 0 + 3


def test_act_permutes_axes():
    c = elliptic_chart((0, 0.5, 1))
    u = c.sample(3, 0)
    np.testing.assert_array_equal(c.act((2, 0, 1))(u)[:, [2, 0, 1]], c(u))


# -- charts from trees ----------------------------------------------------------------------

def test_corolla_is_elliptic():
    d = DressedTree.make(corolla(4), {"": [0, 0.2, 0.7, 1]})
    c, ref = chart_from_tree(d), elliptic_chart((0, 0.2, 0.7, 1))
    u = ref.sample(10, 0)
    np.testing.assert_allclose(c(u), ref(u), atol=1e-15)


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_left_comb_is_spherical(L):
    c = chart_from_tree(DressedTree.make(left_comb(L)))
    ref = spherical_chart(L - 1)
    u = c.sample(30, L)
    assert np.abs(c(u) - ref(u[:, ::-1])).max() < 1e-12


def test_dressed_tree_validation():
    with pytest.raises(ValueError):
        DressedTree.make("(*,*,*)", default=None)
    with pytest.raises(ValueError):
        DressedTree.make("(*,*,*)", {"0": [0, 1, 2]})
    with pytest.raises(ValueError):
        DressedTree.make("(*,*,*)", {"": [0, 1]})
    with pytest.raises(ValueError):
        DressedTree.make("(*,*)", leaf_axes=(0, 0))
    with pytest.raises(ValueError):
        DressedTree(LEAF)


def test_dressed_tree_moduli_and_slots():
    d = DressedTree.make("((*,*,*),*,(*,*))")
    assert d.moduli == 2 and d.n == 5
    assert d.coordinate_slots() == [((), 0), ((), 1), ((0,), 0), ((0,), 1), ((2,), 0)]
    assert chart_from_tree(d).n == 5


def test_params_json_roundtrip():
    d = DressedTree.make("((*,*,*),*,*)", {"": [0, 3, 4], "0": [1, 2, 5]})
    again = DressedTree.make(d.tree, d.params_json())
    assert again.params == d.params


def test_functoriality_of_grafting():
    outer = DressedTree.make(corolla(3), {"": [0, 0.3, 1]})
    subs = [DressedTree.random(parse_tree("(*,*,*)"), 1), None, DressedTree.make(left_comb(3))]
    grafted = chart_from_tree(graft_dressed(outer, subs))
    direct = sphere_compose(elliptic_chart(outer.params[()]),
                            [point_chart() if s is None else chart_from_tree(s) for s in subs])
    u = grafted.sample(40, 0)
    assert np.abs(grafted(u) - direct(u)).max() < 1e-12


# -- orthogonality ---------------------------------------------------------------------------

def test_verify_orthogonal_examples():
    assert verify_orthogonal(elliptic_chart((0, 1, 4))).passed
    assert verify_orthogonal(chart_from_tree(DressedTree.make(left_comb(3)))).passed


def test_sheared_chart_fails():
    base = elliptic_chart((0, 1, 4))

    def fmap(u):
        return base._map(np.stack([u[:, 0] + u[:, 1] - 1.8, u[:, 1]], axis=1))

    sheared = Chart(2, [(1.2, 1.6), (1.9, 2.1)], fmap)
    rep = verify_orthogonal(sheared)
    assert not rep.passed and rep.max_offdiag > 1e-2


def test_sample_respects_margin():
    c = elliptic_chart((0, 1, 4))
    u = c.sample(200, 3)
    t = (u - np.array([0, 1])) / np.array([1, 3])
    assert np.all((t > 0.02) & (t < 0.98))


# -- Stäckel systems of charts --------------------------------------------------------------

def test_cross_oracle_s3():
    e = (0, 1, 3, 7)
    S1 = stackel_of_chart(DressedTree.make(corolla(4), {"": list(e)}))
    S2 = stackel_from_killing(elliptic_form(e).form)
    assert subspace_angles(S1, S2).max() < 1e-7


def test_comb_system_on_s2():
    S = stackel_of_chart(DressedTree.make(left_comb(3)))
    assert len(S.basis) == 2
    assert S.metric_distance() < 1e-10


def test_pullback_is_diagonal():
    d = DressedTree.random(parse_tree("((*,*),(*,*,*))"), 4)
    S, c = stackel_of_chart(d), chart_from_tree(d)
    assert pullback_offdiag(S, c, c.sample(10, 77)) < 1e-8


@pytest.mark.parametrize("text,path", [("((*,*),*)", ()), ("((*,*,*),*,(*,*))", (0,)),
                                       ("((*,*,*),*,(*,*))", ()), ("(*,(*,(*,*)))", (1,))])
def test_mirror_gives_permuted_system(text, path):
    d = DressedTree.random(parse_tree(text), 5)
    S = stackel_of_chart(d)
    same = stackel_of_chart(mirror_dressed(d, path, relabel=True))
    assert subspace_angles(S, same).max() < 1e-7
    moved = stackel_of_chart(mirror_dressed(d, path, relabel=False))
    pushed = permute_system(S, mirror_permutation(d, path), tol=1e-8)
    assert subspace_angles(pushed, moved).max() < 1e-7


def test_mirror_relabel_preserves_chart_image():
    d = DressedTree.make(left_comb(3))
    m = mirror_dressed(d, ())
    assert m.tree == parse_tree("(*,(*,*))") and m.leaf_axes == (2, 0, 1)
    c1, c2 = chart_from_tree(d), chart_from_tree(m)
    u = c1.sample(10, 0)
    # the reversed root block runs its angle backwards
    np.testing.assert_allclose(c2(np.stack([np.pi / 2 - u[:, 0], u[:, 1]], axis=1)), c1(u), atol=1e-15)
    assert mirror_permutation(d, ()) == (1, 2, 0)


# -- elliptic form --------------------------------------------------------------------------

def test_elliptic_form_is_exact_for_integers():
    D = elliptic_form((0, 1, 4))
    assert D.diag == (Fraction(1, 2), Fraction(2), Fraction(5, 2))
    assert D.form.exact


def test_elliptic_form_validates_s3():
    D = elliptic_form((0.0, 1.0, 3.0, 7.0), n_check=100)
    assert len(D.diag) == 6


def test_elliptic_form_rejects_bad_input():
    with pytest.raises(ValueError):
        elliptic_form((0, 2, 1))
    with pytest.raises(ValueError):
        elliptic_form((1,))


# -- grid lines ------------------------------------------------------------------------------

def test_gridlines_shape_and_sphere():
    c = elliptic_chart((0, 1, 4))
    lines = emit_gridlines(c, 64, 5)
    assert len(lines) == 10
    assert {pl.family for pl in lines} == {0, 1}
    for pl in lines:
        assert pl.points.shape == (64, 3)
        assert np.abs(np.sum(pl.points ** 2, axis=1) - 1).max() < 1e-12


def test_gridlines_deterministic_and_s2_only():
    c = chart_from_tree(DressedTree.make(left_comb(3)))
    a = emit_gridlines(c, 16)
    b = emit_gridlines(c, 16)
    assert all(np.array_equal(p.points, q.points) for p, q in zip(a, b))
    with pytest.raises(ValueError):
        emit_gridlines(elliptic_chart((0, 0.2, 0.5, 1)))


def test_spherical_gridlines_are_meridians_and_parallels():
    c = chart_from_tree(DressedTree.make(left_comb(3)))
    for pl in emit_gridlines(c, 16, 3):
        if pl.family == 1:
            # root angle fixed: last coordinate constant (a parallel)
            assert np.ptp(pl.points[:, 2]) < 1e-15
        else:
            # inner angle fixed: ratio x1/x0 constant (a meridian)
            r = pl.points[1:-1, 1] / pl.points[1:-1, 0]
            assert np.ptp(r) < 1e-12
