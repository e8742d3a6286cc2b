# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched kernels; same contracts as ``_pykernels`` for float64 input."""
import numpy as np

from libc.math cimport fabs, sqrt


cdef inline void _wedge(const double[::1] x, const double[::1] u, double[::1] out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, p = 0
    for i in range(d):
        for j in range(i + 1, d):
            out[p] = x[i] * u[j] - x[j] * u[i]
            p += 1


cdef void _frame(const double[:, ::1] B, const double[::1] x, const double[:, ::1] f,
                 double[:, ::1] w0, double[:, ::1] bw0) noexcept nogil:
    cdef Py_ssize_t n = f.shape[0], d = f.shape[1], N = B.shape[0]
    cdef Py_ssize_t a, q, r
    cdef double s
    for a in range(n):
        _wedge(x, f[a], w0[a], d)
    for a in range(n):
        for q in range(N):
            s = 0.0
            for r in range(N):
                s += B[q, r] * w0[a, r]
            bw0[a, q] = s


def killing(const double[:, ::1] B, const double[:, ::1] X, const double[:, :, ::1] F):
    cdef Py_ssize_t P = F.shape[0], n = F.shape[1], N = B.shape[0]
    cdef Py_ssize_t p, a, b, q
    cdef double s
    out = np.empty((P, n, n))
    cdef double[:, :, ::1] K = out
    cdef double[:, ::1] w0 = np.empty((n, N))
    cdef double[:, ::1] bw0 = np.empty((n, N))
    with nogil:
        for p in range(P):
            _frame(B, X[p], F[p], w0, bw0)
            for a in range(n):
                for b in range(a, n):
                    s = 0.0
                    for q in range(N):
                        s += bw0[a, q] * w0[b, q]
                    K[p, a, b] = s
                    K[p, b, a] = s
    return out


def nabla(const double[:, ::1] B, const double[:, ::1] X, const double[:, :, ::1] F):
    cdef Py_ssize_t P = F.shape[0], n = F.shape[1], d = F.shape[2], N = B.shape[0]
    cdef Py_ssize_t p, a, b, c, q
    cdef double s
    out = np.empty((P, n, n, n))
    cdef double[:, :, :, ::1] D = out
    cdef double[:, ::1] w0 = np.empty((n, N))
    cdef double[:, ::1] bw0 = np.empty((n, N))
    cdef double[:, :, ::1] w1 = np.empty((n, n, N))
    with nogil:
        for p in range(P):
            _frame(B, X[p], F[p], w0, bw0)
            for c in range(n):
                for a in range(n):
                    _wedge(F[p, c], F[p, a], w1[c, a], d)
            for c in range(n):
                for a in range(n):
                    for b in range(a, n):
                        s = 0.0
                        for q in range(N):
                            s += w1[c, a, q] * bw0[b, q] + bw0[a, q] * w1[c, b, q]
                        D[p, c, a, b] = s
                        D[p, c, b, a] = s
    return out


cdef inline double _anti(const double[:, :, ::1] t, Py_ssize_t a, Py_ssize_t b, Py_ssize_t c) noexcept nogil:
    return (t[a, b, c] - t[a, c, b] - t[b, a, c] + t[b, c, a] + t[c, a, b] - t[c, b, a]) / 6.0


def nijenhuis(const double[:, :, ::1] K, const double[:, :, :, ::1] D):
    """Per-point max-abs and Frobenius norms of the three integrability tensors."""
    cdef Py_ssize_t P = K.shape[0], n = K.shape[1]
    cdef Py_ssize_t p, a, b, c, e, f, k
    cdef double s, v
    mx_arr = np.zeros((P, 3))
    fro_arr = np.zeros((P, 3))
    if n < 3:
        return mx_arr, fro_arr
    cdef double[:, ::1] mx = mx_arr
    cdef double[:, ::1] fro = fro_arr
    cdef double[:, ::1] K2 = np.empty((n, n))
    cdef double[:, ::1] K3 = np.empty((n, n))
    cdef double[:, :, :, ::1] T = np.empty((3, n, n, n))
    with nogil:
        for p in range(P):
            for a in range(n):
                for b in range(n):
                    s = 0.0
                    for e in range(n):
                        s += K[p, a, e] * K[p, e, b]
                    K2[a, b] = s
            for a in range(n):
                for b in range(n):
                    s = 0.0
                    for e in range(n):
                        s += K2[a, e] * K[p, e, b]
                    K3[a, b] = s
            for a in range(n):
                for b in range(n):
                    for c in range(n):
                        # T1 = K_da D_bcd ; T2 = (K^2)_da D_bcd + K_da K_eb D_dce ;
                        # T3 = (K^3)_da D_bcd + K_da (K^2)_fb D_dcf
                        T[0, a, b, c] = 0.0
                        T[1, a, b, c] = 0.0
                        T[2, a, b, c] = 0.0
                        for e in range(n):
                            v = D[p, b, c, e]
                            T[0, a, b, c] += K[p, e, a] * v
                            T[1, a, b, c] += K2[e, a] * v
                            T[2, a, b, c] += K3[e, a] * v
                        for e in range(n):
                            for f in range(n):
                                v = K[p, e, a] * D[p, e, c, f]
                                T[1, a, b, c] += v * K[p, f, b]
                                T[2, a, b, c] += v * K2[f, b]
            for k in range(3):
                s = 0.0
                for a in range(n):
                    for b in range(a + 1, n):
                        for c in range(b + 1, n):
                            v = _anti(T[k], a, b, c)
                            s += v * v
                            if fabs(v) > mx[p, k]:
                                mx[p, k] = fabs(v)
                fro[p, k] = sqrt(6.0 * s)
    return mx_arr, fro_arr
