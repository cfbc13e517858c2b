# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the numpy kernels in py_backend.

Same stencils, same formulas; parity is asserted by tests.  Only the hot
paths live here: stencil derivative/transpose, the gauge field split, the
energy, and the n = 2 / n = 3 exponential update.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()


def _as3(F):
    F = np.ascontiguousarray(F, dtype=np.float64)
    shape = F.shape
    N = shape[0]
    rest = 1
    for s in shape[2:]:
        rest *= s
    return F.reshape(N, N, rest), shape


cdef void _diff_axis0(double[:, :, ::1] F, double[:, :, ::1] out, double inv2h) noexcept nogil:
    cdef Py_ssize_t N = F.shape[0], M = F.shape[1], R = F.shape[2]
    cdef Py_ssize_t i, j, r
    for j in range(M):
        for r in range(R):
            out[0, j, r] = (-3.0 * F[0, j, r] + 4.0 * F[1, j, r] - F[2, j, r]) * inv2h
            out[N - 1, j, r] = (3.0 * F[N - 1, j, r] - 4.0 * F[N - 2, j, r] + F[N - 3, j, r]) * inv2h
    for i in range(1, N - 1):
        for j in range(M):
            for r in range(R):
                out[i, j, r] = (F[i + 1, j, r] - F[i - 1, j, r]) * inv2h


cdef void _diff_axis1(double[:, :, ::1] F, double[:, :, ::1] out, double inv2h) noexcept nogil:
    cdef Py_ssize_t N = F.shape[0], M = F.shape[1], R = F.shape[2]
    cdef Py_ssize_t i, j, r
    for i in range(N):
        for r in range(R):
            out[i, 0, r] = (-3.0 * F[i, 0, r] + 4.0 * F[i, 1, r] - F[i, 2, r]) * inv2h
            out[i, M - 1, r] = (3.0 * F[i, M - 1, r] - 4.0 * F[i, M - 2, r] + F[i, M - 3, r]) * inv2h
        for j in range(1, M - 1):
            for r in range(R):
                out[i, j, r] = (F[i, j + 1, r] - F[i, j - 1, r]) * inv2h


cdef void _difft_axis0(double[:, :, ::1] F, double[:, :, ::1] out, double inv2h) noexcept nogil:
    cdef Py_ssize_t N = F.shape[0], M = F.shape[1], R = F.shape[2]
    cdef Py_ssize_t i, j, r
    for i in range(N):
        for j in range(M):
            for r in range(R):
                out[i, j, r] = 0.0
    for i in range(1, N - 1):
        for j in range(M):
            for r in range(R):
                out[i - 1, j, r] -= F[i, j, r]
                out[i + 1, j, r] += F[i, j, r]
    for j in range(M):
        for r in range(R):
            out[0, j, r] += -3.0 * F[0, j, r]
            out[1, j, r] += 4.0 * F[0, j, r]
            out[2, j, r] += -1.0 * F[0, j, r]
            out[N - 1, j, r] += 3.0 * F[N - 1, j, r]
            out[N - 2, j, r] += -4.0 * F[N - 1, j, r]
            out[N - 3, j, r] += 1.0 * F[N - 1, j, r]
    for i in range(N):
        for j in range(M):
            for r in range(R):
                out[i, j, r] *= inv2h


cdef void _difft_axis1(double[:, :, ::1] F, double[:, :, ::1] out, double inv2h) noexcept nogil:
    cdef Py_ssize_t N = F.shape[0], M = F.shape[1], R = F.shape[2]
    cdef Py_ssize_t i, j, r
    for i in range(N):
        for j in range(M):
            for r in range(R):
                out[i, j, r] = 0.0
    for i in range(N):
        for j in range(1, M - 1):
            for r in range(R):
                out[i, j - 1, r] -= F[i, j, r]
                out[i, j + 1, r] += F[i, j, r]
        for r in range(R):
            out[i, 0, r] += -3.0 * F[i, 0, r]
            out[i, 1, r] += 4.0 * F[i, 0, r]
            out[i, 2, r] += -1.0 * F[i, 0, r]
            out[i, M - 1, r] += 3.0 * F[i, M - 1, r]
            out[i, M - 2, r] += -4.0 * F[i, M - 1, r]
            out[i, M - 3, r] += 1.0 * F[i, M - 1, r]
    for i in range(N):
        for j in range(M):
            for r in range(R):
                out[i, j, r] *= inv2h


def diff(F, int axis, double h):
    F3, shape = _as3(F)
    out = np.empty_like(F3)
    cdef double[:, :, ::1] fv = F3
    cdef double[:, :, ::1] ov = out
    cdef double inv2h = 1.0 / (2.0 * h)
    if axis == 0:
        _diff_axis0(fv, ov, inv2h)
    else:
        _diff_axis1(fv, ov, inv2h)
    return out.reshape(shape)


def diff_t(F, int axis, double h):
    F3, shape = _as3(F)
    out = np.empty_like(F3)
    cdef double[:, :, ::1] fv = F3
    cdef double[:, :, ::1] ov = out
    cdef double inv2h = 1.0 / (2.0 * h)
    if axis == 0:
        _difft_axis0(fv, ov, inv2h)
    else:
        _difft_axis1(fv, ov, inv2h)
    return out.reshape(shape)


def gauge_fields(P, Om, double h):
    """(A, S, Ohat), each (N, N, n, n, 2); see the numpy twin for formulas."""
    cdef Py_ssize_t N = P.shape[0], n = P.shape[2]
    dP0 = diff(P, 0, h)
    dP1 = diff(P, 1, h)
    A = np.empty((N, N, n, n, 2), dtype=np.float64)
    S = np.empty((N, N, n, n, 2), dtype=np.float64)
    Ohat = np.empty((N, N, n, n, 2), dtype=np.float64)
    cdef double[:, :, :, ::1] pv = np.ascontiguousarray(P)
    cdef double[:, :, :, ::1] d0 = dP0
    cdef double[:, :, :, ::1] d1 = dP1
    cdef double[:, :, :, :, ::1] om = np.ascontiguousarray(Om)
    cdef double[:, :, :, :, ::1] av = A
    cdef double[:, :, :, :, ::1] sv = S
    cdef double[:, :, :, :, ::1] hv = Ohat
    cdef Py_ssize_t x, y, i, k, j, d
    cdef double m_ik, m_ki, o_ik, acc
    # scratch for M = P^T dP and P^T Om P per cell/direction
    M = np.empty((n, n), dtype=np.float64)
    T = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] mv = M
    cdef double[:, ::1] tv = T
    with nogil:
        for x in range(N):
            for y in range(N):
                for d in range(2):
                    # M = P^T dP_d
                    for i in range(n):
                        for k in range(n):
                            acc = 0.0
                            if d == 0:
                                for j in range(n):
                                    acc += pv[x, y, j, i] * d0[x, y, j, k]
                            else:
                                for j in range(n):
                                    acc += pv[x, y, j, i] * d1[x, y, j, k]
                            mv[i, k] = acc
                    # T = Om_d P ; Ohat = P^T T
                    for i in range(n):
                        for k in range(n):
                            acc = 0.0
                            for j in range(n):
                                acc += om[x, y, i, j, d] * pv[x, y, j, k]
                            tv[i, k] = acc
                    for i in range(n):
                        for k in range(n):
                            acc = 0.0
                            for j in range(n):
                                acc += pv[x, y, j, i] * tv[j, k]
                            hv[x, y, i, k, d] = acc
                    for i in range(n):
                        for k in range(n):
                            m_ik = mv[i, k]
                            m_ki = mv[k, i]
                            av[x, y, i, k, d] = 0.5 * (m_ik - m_ki) - hv[x, y, i, k, d]
                            sv[x, y, i, k, d] = 0.5 * (m_ik + m_ki)
    return A, S, Ohat


def energy(P, Om, double h):
    A, _, _ = gauge_fields(P, Om, h)
    A = np.ascontiguousarray(A)
    cdef double[:, :, :, :, ::1] av = A
    cdef Py_ssize_t N = A.shape[0], n = A.shape[2]
    cdef Py_ssize_t x, y, i, k, d
    cdef double acc = 0.0
    with nogil:
        for x in range(N):
            for y in range(N):
                for i in range(n):
                    for k in range(n):
                        for d in range(2):
                            acc += av[x, y, i, k, d] * av[x, y, i, k, d]
    return acc * h * h


cdef inline void _exp2(double a, double* out) noexcept nogil:
    cdef double c = cos(a), s = sin(a)
    out[0] = c
    out[1] = -s
    out[2] = s
    out[3] = c


cdef inline void _exp3(double w1, double w2, double w3, double* out) noexcept nogil:
    cdef double th2 = w1 * w1 + w2 * w2 + w3 * w3
    cdef double th = sqrt(th2)
    cdef double a, b
    if th < 1e-4:
        a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        a = sin(th) / th
        b = (1.0 - cos(th)) / th2
    # K = [[0,-w3,w2],[w3,0,-w1],[-w2,w1,0]]; R = I + a K + b K^2
    out[0] = 1.0 + b * (-w3 * w3 - w2 * w2)
    out[1] = -a * w3 + b * (w1 * w2)
    out[2] = a * w2 + b * (w1 * w3)
    out[3] = a * w3 + b * (w1 * w2)
    out[4] = 1.0 + b * (-w3 * w3 - w1 * w1)
    out[5] = -a * w1 + b * (w2 * w3)
    out[6] = -a * w2 + b * (w1 * w3)
    out[7] = a * w1 + b * (w2 * w3)
    out[8] = 1.0 + b * (-w2 * w2 - w1 * w1)


def so_exp(Z, double tau):
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    cdef Py_ssize_t n = Z.shape[Z.ndim - 1]
    zflat = Z.reshape(-1, n, n)
    out = np.empty_like(zflat)
    cdef double[:, :, ::1] zv = zflat
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t m = zflat.shape[0], c
    cdef double buf[9]
    cdef Py_ssize_t i, k
    if n == 2:
        with nogil:
            for c in range(m):
                _exp2(tau * zv[c, 1, 0], buf)
                ov[c, 0, 0] = buf[0]
                ov[c, 0, 1] = buf[1]
                ov[c, 1, 0] = buf[2]
                ov[c, 1, 1] = buf[3]
    elif n == 3:
        with nogil:
            for c in range(m):
                _exp3(tau * zv[c, 2, 1], tau * zv[c, 0, 2], tau * zv[c, 1, 0], buf)
                for i in range(3):
                    for k in range(3):
                        ov[c, i, k] = buf[3 * i + k]
    else:
        raise ValueError("compiled so_exp supports n in {2, 3}")
    return out.reshape(Z.shape)


def rot_update(P, Z, double tau):
    P = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[P.ndim - 1]
    R = so_exp(Z, tau)
    pflat = P.reshape(-1, n, n)
    rflat = R.reshape(-1, n, n)
    out = np.empty_like(pflat)
    cdef double[:, :, ::1] pv = pflat
    cdef double[:, :, ::1] rv = rflat
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t m = pflat.shape[0], c, i, j, k
    cdef double acc
    with nogil:
        for c in range(m):
            for i in range(n):
                for k in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc += pv[c, i, j] * rv[c, j, k]
                    ov[c, i, k] = acc
    return out.reshape(P.shape)
