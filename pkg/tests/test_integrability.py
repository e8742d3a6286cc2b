from fractions import Fraction

import numpy as np
import pytest

from sepcoords.bivector import (
    BivectorForm,
    PointFrame,
    act_isometry,
    eval_killing,
    orthonormal_frame,
    plucker_forms,
    random_orthogonal,
    sample_frames,
)
from sepcoords.charts import elliptic_form
from sepcoords.integrability import (
    NormalFormDiag,
    ResidualReport,
    StackelError,
    StackelSystem,
    act_permutation,
    commutation_residual,
    compose_permutations,
    eigen_simplicity,
    killing_residual,
    nijenhuis_residual,
    nijenhuis_residuals,
    permute_system,
    residual_report,
    stackel_from_killing,
    subspace_angles,
    verify_stackel,
)


# -- independent oracle: integrability of eigenvector complements -------------------

def _eigvecs_ambient(B, y, ref=None):
    p = orthonormal_frame(y, 0)
    _, V = np.linalg.eigh(eval_killing(B, p))
    E = V.T @ p.frame  # rows: ambient eigenvectors
    if ref is not None:
        E = E * np.sign(np.sum(E * ref, axis=1))[:, None]
    return E


def surface_normal_defect(B, x, h=1e-6):
    """max |<D_u E, w> - <D_w E, u>| over eigenvectors E and u, w orthogonal to E.

    Zero iff each eigenvector's orthogonal complement is integrable (Frobenius).
    """
    E0 = _eigvecs_ambient(B, x)
    n = E0.shape[0]
    dE = np.empty((n, n, x.size))  # dE[c] = derivative of all E along E0[c]
    for c in range(n):
        yp = np.cos(h) * x + np.sin(h) * E0[c]
        ym = np.cos(h) * x - np.sin(h) * E0[c]
        dE[c] = (_eigvecs_ambient(B, yp, E0) - _eigvecs_ambient(B, ym, E0)) / (2 * h)
    worst = 0.0
    for a in range(n):
        for u in range(n):
            for w in range(u + 1, n):
                if a in (u, w):
                    continue
                val = dE[u, a] @ E0[w] - dE[w, a] @ E0[u]
                worst = max(worst, abs(val))
    return worst


def test_oracle_separates_elliptic_from_random():
    e = elliptic_form((0.0, 1.0, 3.0, 7.0)).form
    R = BivectorForm.random(3, 7)
    rng = np.random.default_rng(3)
    for _ in range(4):
        x = rng.standard_normal(4)
        x /= np.linalg.norm(x)
        assert surface_normal_defect(e, x) < 1e-5
        assert surface_normal_defect(R, x) > 1e-3
        p = orthonormal_frame(x, 1)
        assert nijenhuis_residual(e, p).max() < 1e-10
        assert nijenhuis_residual(R, p).max() > 1e-3


# -- residuals ---------------------------------------------------------------------------

def test_killing_residual_methods_agree():
    B = BivectorForm.random(3, 0)
    p = sample_frames(3, 1, 0)[0]
    assert killing_residual(B, p) < 1e-12
    assert killing_residual(B, p, method="fd") < 1e-6
    with pytest.raises(ValueError):
        killing_residual(B, p, method="guess")


def test_nijenhuis_constant_metric_is_zero():
    for p in sample_frames(3, 5, 1):
        assert nijenhuis_residual(BivectorForm.identity(3), p).max() < 1e-14


def test_nijenhuis_void_on_s2():
    frames = sample_frames(2, 30, 2)
    for k in range(5):
        assert nijenhuis_residuals(BivectorForm.random(2, k), frames).max() < 1e-12


def test_nijenhuis_frobenius_norm_is_frame_independent():
    B = BivectorForm.random(3, 4)
    x = sample_frames(3, 1, 9)[0].x
    a = nijenhuis_residual(B, orthonormal_frame(x, 1), norm="fro")
    b = nijenhuis_residual(B, orthonormal_frame(x, 2), norm="fro")
    np.testing.assert_allclose(a, b, rtol=1e-10)
    with pytest.raises(ValueError):
        nijenhuis_residual(B, orthonormal_frame(x, 1), norm="l1")


def test_exact_nijenhuis_of_identity_is_exactly_zero():
    from sepcoords.bivector import rational_frame

    res = nijenhuis_residual(BivectorForm.identity(3, exact=True), rational_frame(3, 1))
    assert np.all(res == 0)


def test_commutation():
    p = sample_frames(3, 1, 0)[0]
    A = BivectorForm.random(3, 1)
    assert commutation_residual(A, BivectorForm.identity(3), p) == 0.0
    assert commutation_residual(A, A * 2.5, p) < 1e-12
    assert commutation_residual(A, BivectorForm.random(3, 2), p) > 1e-3
    with pytest.raises(ValueError):
        commutation_residual(A, BivectorForm.identity(2), p)


def test_eigen_simplicity():
    p = sample_frames(3, 1, 0)[0]
    assert not eigen_simplicity(BivectorForm.identity(3), p)
    assert eigen_simplicity(elliptic_form((0, 1, 3, 7)).form, p)
    with pytest.raises(ValueError):
        eigen_simplicity(BivectorForm.identity(3), p, gap=0)


# -- reports --------------------------------------------------------------------------

def test_residual_report_roundtrip_and_validation():
    rep, simple = residual_report(elliptic_form((0, 1, 2, 5)).form, 10, 3)
    assert rep.passed and simple == 1.0
    assert ResidualReport.from_dict(rep.to_dict()) == rep
    with pytest.raises(ValueError):
        ResidualReport(killing_max=0.0, nijenhuis_max=[0, 0, 0], points_sampled=0, seed=0)
    with pytest.raises(ValueError):
        ResidualReport(killing_max=-1.0, nijenhuis_max=[0, 0, 0], points_sampled=1, seed=0)


def test_residual_report_fails_random_form():
    rep, _ = residual_report(BivectorForm.random(3, 5), 10, 0)
    assert not rep.passed and rep.verdict == "FAIL"


# -- Stäckel extraction ------------------------------------------------------------

@pytest.mark.parametrize("e", [(0, 1, 4), (0, 1, 3, 7), (0.0, 0.3, 1.1, 2.0, 3.5)])
def test_stackel_from_elliptic(e):
    n = len(e) - 1
    S = stackel_from_killing(elliptic_form(e).form, seed=1)
    assert len(S.basis) == n
    assert S.gap_ratio >= 1e6
    assert S.metric_distance() <= 1e-10
    assert verify_stackel(S, 20, seed=99).passed
    # the given tensor lies in the system
    B = elliptic_form(e).form.to_float()
    target = StackelSystem(n, S.basis + (B,), True)
    assert target.min_singular_value() < 1e-8


def test_stackel_is_blind_to_plucker_shifts():
    base = elliptic_form((0, 1, 3, 7)).form.to_float()
    shifted = base + plucker_forms(3)[0].to_float() * 0.7
    S1 = stackel_from_killing(base)
    S2 = stackel_from_killing(shifted)
    assert subspace_angles(S1, S2).max() < 1e-7


def test_stackel_rejects_non_integrable():
    with pytest.raises(StackelError):
        stackel_from_killing(BivectorForm.random(3, 0))


def test_stackel_rejects_metric():
    with pytest.raises(StackelError, match="simple"):
        stackel_from_killing(BivectorForm.identity(3))


def test_stackel_on_s2_from_any_simple_form():
    # every form on S^2 passes the (void) integrability conditions
    S = stackel_from_killing(elliptic_form((0, 1, 4)).form)
    assert len(S.basis) == 2


def test_stackel_json_roundtrip():
    S = stackel_from_killing(elliptic_form((0, 1, 4)).form)
    S2 = StackelSystem.from_json(S.to_json())
    assert subspace_angles(S, S2).max() < 1e-14
    assert S2.gap_ratio == S.gap_ratio


def test_check_invariants_catches_bad_systems():
    good = stackel_from_killing(elliptic_form((0, 1, 3, 7)).form)
    short = StackelSystem(3, good.basis[:2], True)
    with pytest.raises(StackelError):
        short.check_invariants()
    assert verify_stackel(short).notes
    dup = StackelSystem(3, (good.basis[0], good.basis[1], good.basis[1]), True)
    with pytest.raises(StackelError, match="independent"):
        dup.check_invariants()
    no_metric = StackelSystem(3, good.basis[1:] + (BivectorForm.diagonal(3, [1.0, 0, 0, 0, 0, 0]),), True)
    with pytest.raises(StackelError):
        no_metric.check_invariants()


def test_verify_stackel_flags_noncommuting():
    bad = StackelSystem(3, (BivectorForm.identity(3), BivectorForm.random(3, 1), BivectorForm.random(3, 2)), True)
    rep = verify_stackel(bad, 5)
    assert not rep.passed and rep.commutation_max > 1e-3


# -- normal forms and permutations -------------------------------------------------------

def test_elliptic_normal_form_entries():
    assert elliptic_form((0, 1, 4)).diag == (Fraction(1, 2), 2, Fraction(5, 2))
    assert elliptic_form((0, 1)).diag == (Fraction(1, 2),)


def test_act_permutation_by_hand():
    D = NormalFormDiag(2, (1, 2, 3))  # pairs 01, 02, 12
    assert act_permutation(D, (1, 0, 2)).diag == (1, 3, 2)
    assert act_permutation(D, (0, 1, 2)) == D
    with pytest.raises(ValueError):
        act_permutation(D, (0, 0, 1))


def test_act_permutation_is_an_action():
    D = NormalFormDiag(3, tuple(range(6)))
    s, t = (2, 0, 3, 1), (1, 3, 0, 2)
    assert act_permutation(act_permutation(D, t), s) == act_permutation(D, compose_permutations(s, t))


def test_act_permutation_matches_isometry():
    from sepcoords.bivector import permutation_matrix

    D = NormalFormDiag(3, (1.0, 2.0, 3.5, 4.0, 5.5, 7.0))
    sigma = (2, 0, 3, 1)
    moved = act_isometry(D.form, permutation_matrix(sigma))
    np.testing.assert_allclose(moved.matrix(), act_permutation(D, sigma).form.matrix(), atol=1e-15)


def test_from_form_rejects_off_diagonal():
    with pytest.raises(ValueError):
        NormalFormDiag.from_form(BivectorForm.random(2, 0))


def test_permuted_system_reverifies():
    S = stackel_from_killing(elliptic_form((0, 1, 3, 7)).form)
    P = permute_system(S, (3, 1, 0, 2))
    assert verify_stackel(P, 10, 5).passed
    P.check_invariants()


def test_isometry_equivariance_of_residuals(rng):
    B = BivectorForm.random(3, rng)
    R = random_orthogonal(4, rng)
    p = sample_frames(3, 1, 4)[0]
    np.testing.assert_allclose(nijenhuis_residual(act_isometry(B, R), p.transformed(R)),
                               nijenhuis_residual(B, p), atol=1e-12)


def test_commutation_with_itself_is_exactly_zero():
    p = sample_frames(3, 1, 0)[0]
    A = BivectorForm.random(3, 1)
    assert commutation_residual(A, A, p) == 0.0


def test_diagonal_forms_need_not_commute():
    p = sample_frames(3, 1, 2)[0]
    D1 = NormalFormDiag(3, (1.0, 5.0, 2.0, 7.0, 3.0, 0.5)).form
    D2 = NormalFormDiag(3, (4.0, 0.0, 1.0, 2.0, 9.0, 6.0)).form
    assert commutation_residual(D1, D2, p) > 1e-6


def test_zero_form_is_not_simple():
    p = sample_frames(3, 1, 0)[0]
    assert not eigen_simplicity(BivectorForm.zero(3), p)


def test_verify_stackel_rejects_random_member():
    S = StackelSystem(3, (BivectorForm.identity(3), BivectorForm.random(3, 9)), True)
    rep = verify_stackel(S, 10)
    assert not rep.passed and max(rep.nijenhuis_max) > 1e-3


def test_verify_stackel_metric_alone_on_circle():
    rep = verify_stackel(StackelSystem(1, (BivectorForm.identity(1),), True), 5)
    assert rep.passed
