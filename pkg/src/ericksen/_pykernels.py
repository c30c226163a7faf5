"""NumPy reference versions of the compiled kernels in ``_ckernels``."""
import numpy as np


def csr_matvec(indptr, indices, data, x):
    n = len(indptr) - 1
    prod = np.asarray(data) * np.asarray(x)[indices]
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=prod, minlength=n)


def pcg(indptr, indices, data, b, x, dinv, rtol, atol, maxiter):
    n = len(b)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    data = np.asarray(data)
    indices = np.asarray(indices)

    def matvec(v):
        return np.bincount(rows, weights=data * v[indices], minlength=n)

    r = b - matvec(x)
    rnorm = np.sqrt(r @ r)
    history = [rnorm]
    if np.isnan(rnorm):
        raise FloatingPointError("NaN in initial residual")
    target = max(rtol * rnorm, atol)
    if rnorm <= target:
        return 0, np.asarray(history)
    z = dinv * r
    d = z.copy()
    rz = r @ z
    it = 0
    while it < maxiter:
        it += 1
        q = matvec(d)
        pap = d @ q
        if pap <= 0.0:
            break
        alpha = rz / pap
        x += alpha * d
        r -= alpha * q
        rnorm = np.sqrt(r @ r)
        history.append(rnorm)
        if np.isnan(rnorm):
            raise FloatingPointError(f"NaN encountered in CG iteration {it}")
        if rnorm <= target:
            break
        z = dinv * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    return it, np.asarray(history)


def pair_sqdist(ei, ej, v):
    diff = v[ei] - v[ej]
    return np.einsum("ij,ij->i", diff, diff)


def scatter_pairs(ei, ej, w, n):
    return np.bincount(ei, weights=w, minlength=n) + np.bincount(ej, weights=w, minlength=n)
