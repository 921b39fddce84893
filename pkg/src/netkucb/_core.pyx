# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fast paths for the incremental-inverse and kernel-row loops.

Semantics match netkucb._ops_np exactly; only the evaluation order of the
floating-point reductions differs.
"""

from libc.math cimport exp, sqrt


def grow_inverse(double[:, ::1] M, const double[::1] u, double c, Py_ssize_t n):
    cdef Py_ssize_t i, j
    cdef double cu
    for i in range(n):
        cu = c * u[i]
        for j in range(i, n):
            M[i, j] += cu * u[j]
            M[j, i] = M[i, j]
        M[i, n] = -cu
        M[n, i] = -cu
    M[n, n] = c


def sherman_morrison(double[:, ::1] Ainv, const double[::1] phi):
    cdef Py_ssize_t p = Ainv.shape[0]
    cdef Py_ssize_t i, j
    cdef double s = 1.0
    cdef double ui
    # u = Ainv @ phi, accumulated on the stack-free temporary below
    cdef double[::1] u = phi.copy()
    for i in range(p):
        ui = 0.0
        for j in range(p):
            ui += Ainv[i, j] * phi[j]
        u[i] = ui
        s += phi[i] * ui
    cdef double inv_s = 1.0 / s
    for i in range(p):
        ui = u[i] * inv_s
        for j in range(i, p):
            Ainv[i, j] -= ui * u[j]
            Ainv[j, i] = Ainv[i, j]
    return s


def linear_row(const double[:, ::1] P, const double[::1] q, double[::1] out, Py_ssize_t n):
    cdef Py_ssize_t d = P.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += P[i, j] * q[j]
        out[i] = acc


def rbf_row(const double[:, ::1] P, const double[::1] q, double inv_two_sq,
            double[::1] out, Py_ssize_t n):
    cdef Py_ssize_t d = P.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, diff
    for i in range(n):
        acc = 0.0
        for j in range(d):
            diff = P[i, j] - q[j]
            acc += diff * diff
        out[i] = exp(-acc * inv_two_sq)


def matern_row(const double[:, ::1] P, const double[::1] q, double lengthscale, double nu,
               double[::1] out, Py_ssize_t n):
    cdef Py_ssize_t d = P.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, diff, r, t
    if nu != 0.5 and nu != 1.5 and nu != 2.5:
        raise ValueError(f"unsupported matern smoothness {nu}")
    for i in range(n):
        acc = 0.0
        for j in range(d):
            diff = P[i, j] - q[j]
            acc += diff * diff
        r = sqrt(acc) / lengthscale
        if nu == 0.5:
            out[i] = exp(-r)
        elif nu == 1.5:
            t = sqrt(3.0) * r
            out[i] = (1.0 + t) * exp(-t)
        else:
            t = sqrt(5.0) * r
            out[i] = (1.0 + t + t * t / 3.0) * exp(-t)
