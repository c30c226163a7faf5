"""Compiled inner loops: CSR products, Jacobi-preconditioned CG, edge sums.

Every function here has a NumPy twin in ``_pykernels`` with the same
signature; ``ericksen.kernels`` picks one at import time.
"""
import numpy as np

from libc.math cimport sqrt, isnan


def csr_matvec(const int[::1] indptr, const int[::1] indices,
               const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef Py_ssize_t i, p
    cdef double acc
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        y[i] = acc
    return out


cdef inline double _dot(double[::1] a, double[::1] b, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += a[i] * b[i]
    return acc


def pcg(const int[::1] indptr, const int[::1] indices, const double[::1] data,
        const double[::1] b, double[::1] x, const double[::1] dinv,
        double rtol, double atol, Py_ssize_t maxiter):
    """Jacobi-preconditioned CG, updating ``x`` in place.

    Returns ``(iterations, residual_history)``; the history holds the
    2-norm of the recursively updated residual, starting with the
    initial residual.
    """
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, p, it
    cdef double acc, rz, rz_new, alpha, beta, pap, rnorm, target

    r_arr = np.empty(n)
    z_arr = np.empty(n)
    d_arr = np.empty(n)
    q_arr = np.empty(n)
    cdef double[::1] r = r_arr
    cdef double[::1] z = z_arr
    cdef double[::1] d = d_arr
    cdef double[::1] q = q_arr

    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        r[i] = b[i] - acc
    rnorm = sqrt(_dot(r, r, n))
    history = [rnorm]
    if isnan(rnorm):
        raise FloatingPointError("NaN in initial residual")
    target = max(rtol * rnorm, atol)
    if rnorm <= target:
        return 0, np.asarray(history)

    for i in range(n):
        z[i] = dinv[i] * r[i]
        d[i] = z[i]
    rz = _dot(r, z, n)

    it = 0
    while it < maxiter:
        it += 1
        for i in range(n):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * d[indices[p]]
            q[i] = acc
        pap = _dot(d, q, n)
        if pap <= 0.0:
            # direction in the null space of a semidefinite matrix
            break
        alpha = rz / pap
        for i in range(n):
            x[i] += alpha * d[i]
            r[i] -= alpha * q[i]
        rnorm = sqrt(_dot(r, r, n))
        history.append(rnorm)
        if isnan(rnorm):
            raise FloatingPointError("NaN encountered in CG iteration %d" % it)
        if rnorm <= target:
            break
        for i in range(n):
            z[i] = dinv[i] * r[i]
        rz_new = _dot(r, z, n)
        beta = rz_new / rz
        rz = rz_new
        for i in range(n):
            d[i] = z[i] + beta * d[i]
    return it, np.asarray(history)


def pair_sqdist(const int[::1] ei, const int[::1] ej, const double[:, ::1] v):
    """``|v[ei[e]] - v[ej[e]]|**2`` for every edge ``e``."""
    cdef Py_ssize_t m = ei.shape[0]
    cdef Py_ssize_t dim = v.shape[1]
    cdef Py_ssize_t e, c
    cdef double acc, t
    out = np.empty(m)
    cdef double[::1] o = out
    for e in range(m):
        acc = 0.0
        for c in range(dim):
            t = v[ei[e], c] - v[ej[e], c]
            acc += t * t
        o[e] = acc
    return out


def scatter_pairs(const int[::1] ei, const int[::1] ej, const double[::1] w,
                  Py_ssize_t n):
    """Row sums of the symmetric matrix with off-diagonal weights ``w``."""
    cdef Py_ssize_t m = ei.shape[0]
    cdef Py_ssize_t e
    out = np.zeros(n)
    cdef double[::1] o = out
    for e in range(m):
        o[ei[e]] += w[e]
        o[ej[e]] += w[e]
    return out
