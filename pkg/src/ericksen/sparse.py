"""Sparse symmetric matrices and a conjugate-gradient solver.

Matrices are ``scipy.sparse.csr_matrix`` objects in canonical form (sorted
column indices, no duplicates). Products and the CG loop run through
:mod:`ericksen.kernels`.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels


class SolverError(RuntimeError):
    """Raised when a linear solve produces NaN or fails to converge where required."""


@dataclass
class SolveReport:
    iterations: int
    final_residual_norm: float
    converged: bool
    initial_residual_norm: float = 0.0
    residual_history: np.ndarray = field(default=None, repr=False)


def from_coo(n_rows, n_cols, rows, cols, values):
    """Build a canonical CSR matrix from coordinate arrays, summing duplicates."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=np.float64).ravel()
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
        raise IndexError("row index out of range")
    if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
        raise IndexError("column index out of range")
    A = sp.coo_matrix((values, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def from_triplets(n_rows, n_cols, entries):
    """CSR matrix from an iterable of ``(i, j, value)`` triplets.

    >>> from_triplets(1, 1, [(0, 0, 1.0), (0, 0, 2.0)]).toarray()
    array([[3.]])
    """
    entries = list(entries)
    if not entries:
        return from_coo(n_rows, n_cols, [], [], [])
    rows, cols, values = zip(*entries)
    return from_coo(n_rows, n_cols, rows, cols, values)


def canonical(A):
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.shape[1],):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    return kernels.csr_matvec(A.indptr, A.indices, A.data, x)


def is_symmetric(A, rtol=1e-12):
    diff = abs(A - A.T)
    scale = abs(A).max() if A.nnz else 0.0
    return diff.nnz == 0 or diff.max() <= rtol * max(scale, np.finfo(float).tiny)


def jacobi(A):
    """Inverse diagonal, with 1 wherever the diagonal vanishes."""
    diag = A.diagonal()
    dinv = np.ones_like(diag)
    nz = diag != 0.0
    dinv[nz] = 1.0 / diag[nz]
    return dinv


def cg_solve(A, b, x0=None, tol=1e-10, max_iters=None, precond="jacobi", atol=0.0,
             backend=None):
    """Preconditioned conjugate gradients for symmetric positive-(semi)definite ``A``.

    Stops once ``||b - A x|| <= max(tol * ||b - A x0||, atol)``. Singular
    systems are fine as long as ``b`` lies in the range of ``A``; started
    from zero, the iterates stay in that range and approach the
    minimum-norm solution.

    Parameters
    ----------
    precond : {"jacobi", None} or ndarray
        Jacobi scaling (zero diagonal entries treated as 1), none, or an
        explicit inverse diagonal.
    backend : str, optional
        Kernel backend name (default: the active one).

    Returns
    -------
    x, SolveReport
    """
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, rhs {b.shape}")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    if max_iters is None:
        max_iters = 10 * max(n, 1)
    if precond is None:
        dinv = np.ones(n)
    elif isinstance(precond, str):
        if precond != "jacobi":
            raise ValueError(f"unknown preconditioner {precond!r}")
        dinv = jacobi(A)
    else:
        dinv = np.asarray(precond, dtype=np.float64)
    A = canonical(A) if not sp.isspmatrix_csr(A) else A
    try:
        iters, history = kernels.pcg(A.indptr, A.indices, A.data, b, x, dinv,
                                     tol, atol, max_iters, backend=backend)
    except FloatingPointError as exc:
        raise SolverError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite entries in CG solution")
    r0 = history[0]
    final = history[-1]
    report = SolveReport(
        iterations=int(iters),
        final_residual_norm=float(final),
        converged=bool(final <= max(tol * r0, atol)),
        initial_residual_norm=float(r0),
        residual_history=history,
    )
    return x, report


def apply_dirichlet(A, b, nodes, values):
    """Symmetric elimination of prescribed unknowns.

    Rows and columns of ``nodes`` are zeroed, their diagonal set to 1, the
    known values moved to the right-hand side, and ``b[nodes] = values``.
    """
    n = A.shape[0]
    nodes = np.asarray(nodes, dtype=np.int64)
    xd = np.zeros(n)
    xd[nodes] = values
    rhs = np.asarray(b, dtype=np.float64) - A @ xd
    keep = np.ones(n)
    keep[nodes] = 0.0
    K = sp.diags(keep)
    fixed = sp.diags(1.0 - keep)
    A_mod = canonical(K @ A @ K + fixed)
    rhs[nodes] = xd[nodes]
    return A_mod, rhs
