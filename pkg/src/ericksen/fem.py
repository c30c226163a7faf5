"""P1 finite-element assembly and the discrete Ericksen energies.

Sign convention: :func:`assemble_stiffness` returns ``K_ij = int grad(phi_i) .
grad(phi_j)``. The edge weights used by the discrete energies are
``k_ij = -K_ij``, which are non-negative on weakly acute meshes.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .sparse import from_coo


@dataclass(frozen=True)
class Quadrature:
    """Quadrature rule on the reference simplex.

    ``points`` holds barycentric coordinates (one row per point), and
    ``weights`` sum to one so that ``|T| * sum(w * f)`` integrates over T.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


def _triangle_rule():
    a, b = 0.445948490915965, 0.091576213509771
    wa, wb = 0.223381589678011, 0.109951743655322
    pts = []
    for c, w in ((a, wa), (b, wb)):
        o = 1.0 - 2.0 * c
        pts += [((o, c, c), w), ((c, o, c), w), ((c, c, o), w)]
    points = np.array([p for p, _ in pts])
    weights = np.array([w for _, w in pts])
    return Quadrature(points, weights / weights.sum(), 4)


def _tet_rule():
    # Keast 11-point rule, weights normalised to the reference volume
    pts = [((0.25, 0.25, 0.25, 0.25), -0.0789333333333333)]
    a, b = 11.0 / 14.0, 1.0 / 14.0
    for k in range(4):
        p = [b] * 4
        p[k] = a
        pts.append((tuple(p), 0.0457333333333333))
    a, b = 0.399403576166799, 0.100596423833201
    for i in range(4):
        for j in range(i + 1, 4):
            p = [b] * 4
            p[i] = p[j] = a
            pts.append((tuple(p), 0.149333333333333))
    points = np.array([p for p, _ in pts])
    weights = np.array([w for _, w in pts])
    return Quadrature(points, weights / weights.sum(), 4)


_RULES = {2: _triangle_rule(), 3: _tet_rule()}


def quadrature(dim):
    """Degree-4 rule for triangles (6 points) or tetrahedra (11 points)."""
    try:
        return _RULES[dim]
    except KeyError:
        raise ValueError(f"no quadrature for dimension {dim}") from None


def cell_geometry(mesh):
    """Unsigned volumes ``(nc,)`` and barycentric gradients ``(nc, d+1, d)``.

    Raises ``ValueError`` on degenerate cells.
    """
    x = mesh.vertices[mesh.cells]
    jac = np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))  # columns x_k - x_0
    det = np.linalg.det(jac)
    scale = np.max(np.abs(jac), axis=(1, 2)) ** mesh.dim
    if np.any(np.abs(det) <= 1e-14 * scale):
        raise ValueError("degenerate (zero-volume) cell in mesh")
    inv = np.linalg.inv(jac)  # rows are gradients of lambda_1..lambda_d
    grads = np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)
    fact = 2.0 if mesh.dim == 2 else 6.0
    return np.abs(det) / fact, grads


def _assemble_local(mesh, local):
    k = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, k, axis=1)
    cols = np.tile(mesh.cells, (1, k))
    n = mesh.n_vertices
    return from_coo(n, n, rows, cols, local.reshape(len(local), -1))


def assemble_stiffness(mesh):
    vol, g = cell_geometry(mesh)
    local = vol[:, None, None] * np.einsum("cad,cbd->cab", g, g)
    return _assemble_local(mesh, local)


def assemble_mass(mesh):
    vol, _ = cell_geometry(mesh)
    k = mesh.dim + 1
    ref = (np.ones((k, k)) + np.eye(k)) / (k * (k + 1))
    return _assemble_local(mesh, vol[:, None, None] * ref[None])


def assemble_lumped_mass(mesh):
    """Lumped weights ``w_i = sum_{T containing x_i} |T|/(d+1)``.

    These coincide with the exact P1 load weights ``int phi_i``.
    """
    vol, _ = cell_geometry(mesh)
    k = mesh.dim + 1
    return np.bincount(mesh.cells.ravel(), weights=np.repeat(vol / k, k),
                       minlength=mesh.n_vertices)


def at_quadrature(mesh, nodal):
    """Values of the P1 interpolant of ``nodal`` at every quadrature point.

    Returns shape ``(nc, nq)`` for scalars and ``(nc, nq, m)`` for vectors.
    """
    q = quadrature(mesh.dim)
    vals = np.asarray(nodal, dtype=float)[mesh.cells]
    if vals.ndim == 2:
        return vals @ q.points.T
    return np.einsum("qa,cam->cqm", q.points, vals)


def quadrature_points(mesh):
    """Physical quadrature points ``(nc, nq, d)``."""
    return at_quadrature(mesh, mesh.vertices)


def integrate(mesh, values_at_qp, vol=None):
    """Integrate values given at quadrature points, shape ``(nc, nq)``."""
    if vol is None:
        vol, _ = cell_geometry(mesh)
    return float(np.sum(vol * (values_at_qp @ quadrature(mesh.dim).weights)))


def assemble_load(mesh, values_at_qp):
    """Vector ``int f phi_i`` for ``f`` given at quadrature points."""
    q = quadrature(mesh.dim)
    vol, _ = cell_geometry(mesh)
    local = vol[:, None] * ((values_at_qp * q.weights) @ q.points)
    return np.bincount(mesh.cells.ravel(), weights=local.ravel(),
                       minlength=mesh.n_vertices)


def assemble_weighted_mass(mesh, values_at_qp):
    """Matrix ``int f phi_i phi_j`` for ``f`` given at quadrature points."""
    q = quadrature(mesh.dim)
    vol, _ = cell_geometry(mesh)
    local = np.einsum("cq,qa,qb->cab", vol[:, None] * values_at_qp * q.weights,
                      q.points, q.points)
    return _assemble_local(mesh, local)


@dataclass(frozen=True)
class EdgeWeights:
    """Off-diagonal stiffness pattern as edge arrays with ``i < j``.

    ``k`` holds the edge weights ``k_ij = -K_ij`` (non-negative on weakly acute meshes).
    """

    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    n: int


def edge_weights(K):
    """Extract :class:`EdgeWeights` from a stiffness matrix (idempotent)."""
    if isinstance(K, EdgeWeights):
        return K
    C = sp.triu(K, k=1).tocoo()
    return EdgeWeights(C.row.astype(np.int32), C.col.astype(np.int32), -C.data, K.shape[0])


def _check_nodal(ew, *fields):
    for f in fields:
        if np.shape(f)[0] != ew.n:
            raise ValueError(f"nodal field of length {np.shape(f)[0]} for {ew.n} nodes")


def _sq_jumps(ew, v):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        d = v[ew.i] - v[ew.j]
        return d * d
    return kernels.pair_sqdist(ew.i, ew.j, v)


def energy_E1h(K, s, n, kappa):
    """Discrete one-constant Ericksen energy.

    ``kappa * sum_{i<j} k_ij (s_i - s_j)^2
    + sum_{i<j} k_ij (s_i^2 + s_j^2)/2 |n_i - n_j|^2``.
    """
    ew = edge_weights(K)
    _check_nodal(ew, s, n)
    s = np.asarray(s, dtype=float)
    ds2 = _sq_jumps(ew, s)
    dn2 = _sq_jumps(ew, n)
    avg = 0.5 * (s[ew.i] ** 2 + s[ew.j] ** 2)
    return float(kappa * np.dot(ew.k, ds2) + np.dot(ew.k * avg, dn2))


def dirichlet_form(K, v):
    """``sum_c v_c^T K v_c``, i.e. ``int |grad I_h v|^2`` for scalar or vector ``v``."""
    v = np.asarray(v, dtype=float)
    Kv = K @ v
    return float(np.sum(v * Kv))


def tilde_energy_E1h(K, s, u, kappa):
    """``(kappa - 1) int |grad s_h|^2 + int |grad u_h|^2``."""
    return (kappa - 1.0) * dirichlet_form(K, s) + dirichlet_form(K, u)


def residuals(K, s, n):
    """Consistency residuals ``(R, R_tilde)``.

    ``R = sum_{i<j} k_ij (s_i - s_j)^2 |n_i - n_j|^2 / 2`` and ``R_tilde`` the
    same with ``|s|`` in place of ``s``.
    """
    ew = edge_weights(K)
    s = np.asarray(s, dtype=float)
    dn2 = _sq_jumps(ew, n)
    r = 0.5 * np.dot(ew.k * _sq_jumps(ew, s), dn2)
    rt = 0.5 * np.dot(ew.k * _sq_jumps(ew, np.abs(s)), dn2)
    return float(r), float(rt)


def assemble_D_of_n(K, n):
    """Diagonal ``D(n)_ii = sum_j k_ij |n_i - n_j|^2``."""
    ew = edge_weights(K)
    w = ew.k * _sq_jumps(ew, n)
    return kernels.scatter_pairs(ew.i, ew.j, w, ew.n)


def assemble_director_blocks(K, s):
    """``(A_tilde, D_tilde)`` with ``A_ij = k_ij (s_i^2 + s_j^2)`` and ``D_ii = sum_j A_ij``.

    The director block of step (a) is ``diag(D_tilde) - A_tilde``.
    """
    ew = edge_weights(K)
    s = np.asarray(s, dtype=float)
    a = ew.k * (s[ew.i] ** 2 + s[ew.j] ** 2)
    A = from_coo(ew.n, ew.n, np.concatenate([ew.i, ew.j]), np.concatenate([ew.j, ew.i]),
                 np.concatenate([a, a]))
    D = kernels.scatter_pairs(ew.i, ew.j, a, ew.n)
    return A, D


def director_laplacian(K, s):
    """Weighted graph Laplacian ``diag(D_tilde) - A_tilde`` as one CSR matrix."""
    A, D = assemble_director_blocks(K, s)
    return (sp.diags(D) - A).tocsr()


def compute_u(s, n):
    """Nodal ``u_i = s_i n_i``."""
    return np.asarray(s, dtype=float)[:, None] * np.asarray(n, dtype=float)


def energy_E2h(mesh, s, dw):
    """``int psi(s_h)`` by degree-4 quadrature (exact for the quartic well)."""
    vals = dw.psi(at_quadrature(mesh, s))
    return integrate(mesh, vals)


def error_norms(mesh, field, exact, grad_exact):
    """``(L2 error, H1-seminorm error)`` of a P1 field against an analytic function.

    ``exact(x)`` maps points ``(..., d)`` to values ``(...)`` or
    ``(..., m)``; ``grad_exact`` returns ``(..., d)`` or ``(..., m, d)``.
    Discontinuities of the exact solution must lie on cell faces.
    """
    q = quadrature(mesh.dim)
    vol, g = cell_geometry(mesh)
    x = quadrature_points(mesh)
    field = np.asarray(field, dtype=float)
    fh = at_quadrature(mesh, field)
    diff = fh - exact(x)
    sq = diff ** 2 if diff.ndim == 2 else np.sum(diff ** 2, axis=-1)
    l2 = np.sqrt(np.sum(vol * (sq @ q.weights)))

    vals = field[mesh.cells]
    if vals.ndim == 2:
        gh = np.einsum("ca,cad->cd", vals, g)[:, None, :]
    else:
        gh = np.einsum("cam,cad->cmd", vals, g)[:, None, :, :]
    gd = gh - grad_exact(x)
    gsq = np.sum(gd.reshape(gd.shape[0], gd.shape[1], -1) ** 2, axis=-1)
    h1 = np.sqrt(np.sum(vol * (gsq @ q.weights)))
    return float(l2), float(h1)
