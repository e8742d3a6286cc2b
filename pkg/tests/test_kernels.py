import os
import subprocess
import sys

import numpy as np
import pytest

from sepcoords import kernels
from sepcoords.bivector import BivectorForm, sample_frames, stack_frames

needs_cython = pytest.mark.skipif("cython" not in kernels.AVAILABLE, reason="extension not built")


def _inputs(n, count, seed):
    B = BivectorForm.random(n, seed).B
    X, F = stack_frames(sample_frames(n, count, seed))
    return B, X, F


@needs_cython
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_backends_agree(n):
    B, X, F = _inputs(n, 17, n)
    for name in ("killing", "nabla"):
        a = getattr(kernels, name)(B, X, F, backend="python")
        b = getattr(kernels, name)(B, X, F, backend="cython")
        np.testing.assert_allclose(a, b, atol=1e-13, rtol=0)
    K = kernels.killing(B, X, F, backend="python")
    D = kernels.nabla(B, X, F, backend="python")
    for a, b in zip(kernels.nijenhuis(K, D, backend="python"), kernels.nijenhuis(K, D, backend="cython")):
        np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_object_arrays_use_python_path():
    from fractions import Fraction

    B = np.array([[Fraction(1)]], dtype=object)
    X = np.array([[Fraction(1), Fraction(0)]], dtype=object)
    F = np.array([[[Fraction(0), Fraction(1)]]], dtype=object)
    K = kernels.killing(B, X, F)
    assert K.dtype == object and K[0, 0, 0] == 1


def test_nijenhuis_vanishes_below_three_dimensions():
    B, X, F = _inputs(2, 5, 0)
    mx, fro = kernels.nijenhuis(kernels.killing(B, X, F), kernels.nabla(B, X, F))
    assert mx.shape == (5, 3) and np.all(mx < 1e-12) and np.all(fro < 1e-12)


def _import_backend(value):
    env = dict(os.environ, SEPCOORDS_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "import sepcoords.kernels as k; print(k.BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_env_forces_python_fallback():
    out = _import_backend("python")
    assert out.returncode == 0 and out.stdout.strip() == "python"


@needs_cython
def test_env_selects_cython():
    out = _import_backend("cython")
    assert out.returncode == 0 and out.stdout.strip() == "cython"
