"""Double-well potential, colloid anchoring and electric energies with their variations.

Director-side variations are returned as node-block-diagonal arrays of
shape ``(n, d, d)`` (the Hessian of a quadratic energy in ``n``) plus a
right-hand side ``(n, d)``, so that the gradient is ``H[i] @ n[i] - rhs[i]``.
Scalar-side variations are returned as ``(matrix, rhs)`` with gradient
``matrix @ s - rhs``.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .colloid import C0
from .fem import assemble_load, assemble_lumped_mass, assemble_weighted_mass, at_quadrature


@dataclass(frozen=True)
class DoubleWell:
    """``psi(s) = scale * (psi_c(s) - psi_e(s))`` with ``psi_c = c s^2``.

    ``psi_e = -a4 s^4 + a3 s^3 + a2 s^2``. Defaults give the well with a
    local minimum at 0 and the global minimum at 0.75.
    """

    scale: float = 1.0 / 0.09
    c: float = 63.0
    a4: float = 16.0
    a3: float = 64.0 / 3.0
    a2: float = 57.0
    s_star: float = 0.750025
    enabled: bool = True

    @property
    def c0(self):
        """Effective convex-split constant: ``psi_c = c0 s^2`` after scaling."""
        return self.scale * self.c if self.enabled else 0.0

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        if not self.enabled:
            return np.zeros_like(s)
        return self.scale * (self.a4 * s**4 - self.a3 * s**3 + (self.c - self.a2) * s**2)

    def dpsi_c(self, s):
        return 2.0 * self.c0 * np.asarray(s, dtype=float)

    def dpsi_e(self, s):
        s = np.asarray(s, dtype=float)
        if not self.enabled:
            return np.zeros_like(s)
        return self.scale * (-4.0 * self.a4 * s**3 + 3.0 * self.a3 * s**2 + 2.0 * self.a2 * s)

    def d2psi_c(self, s):
        return np.full_like(np.asarray(s, dtype=float), 2.0 * self.c0)

    def d2psi_e(self, s):
        s = np.asarray(s, dtype=float)
        if not self.enabled:
            return np.zeros_like(s)
        return self.scale * (-12.0 * self.a4 * s**2 + 6.0 * self.a3 * s + 2.0 * self.a2)

    def dpsi(self, s):
        return self.dpsi_c(s) - self.dpsi_e(s)


def psi_eval(dw, s):
    """``(psi, psi', psi_c', psi_e')`` at ``s``."""
    s = np.asarray(s, dtype=float)
    if np.any((s <= -0.5) | (s >= 1.0)):
        warnings.warn("degree of orientation outside (-1/2, 1)", stacklevel=2)
    return dw.psi(s), dw.dpsi(s), dw.dpsi_c(s), dw.dpsi_e(s)


def double_well_rhs(mesh, dw, s):
    """``B_i = int psi_e'(s_h) phi_i`` by degree-4 quadrature (exact, cubic integrand)."""
    return assemble_load(mesh, dw.dpsi_e(at_quadrature(mesh, s)))


# anchoring ---------------------------------------------------------------

NONE, WEAK, PENALTY = "none", "weak", "dirichlet_penalty"


@dataclass
class AnchoringModel:
    """Colloid anchoring through a phase field.

    ``kind`` is ``"none"``, ``"weak"`` (homeotropic, sign-blind) or
    ``"dirichlet_penalty"`` (director pulled towards ``grad phi / |grad phi|``
    and ``s`` towards ``g``). ``g`` may be a scalar or a nodal array; it
    defaults to the double-well minimum when left as ``None``.
    """

    kind: str = NONE
    K_a: float = 0.0
    phase: object = None
    g: object = None
    C0: float = C0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (NONE, WEAK, PENALTY):
            raise ValueError(f"unknown anchoring kind {self.kind!r}")
        if self.K_a < 0:
            raise ValueError("anchoring weight K_a must be non-negative")
        if self.kind != NONE and self.phase is None:
            raise ValueError("anchoring needs a phase field")

    @property
    def active(self):
        return self.kind != NONE and self.K_a != 0.0

    @property
    def weight(self):
        """``K_a * C0 * eps``."""
        return self.K_a * self.C0 * self.phase.eps if self.kind != NONE else 0.0

    def target(self, n_nodes, s_star):
        g = s_star if self.g is None else self.g
        return np.broadcast_to(np.asarray(g, dtype=float), (n_nodes,))

    def grad_mass(self, mesh):
        """``G_ij = int |I_h grad phi|^2 phi_i phi_j`` (degree-4 quadrature, cached)."""
        G = self._cache.get("G")
        if G is None or G.shape[0] != mesh.n_vertices:
            gq = at_quadrature(mesh, self.phase.grad)
            G = assemble_weighted_mass(mesh, np.sum(gq * gq, axis=-1))
            self._cache["G"] = G
        return G


def _lumped(mesh, lumped):
    return assemble_lumped_mass(mesh) if lumped is None else lumped


def _h_weak(n, grad):
    """``|n|^2 |grad phi|^2 - (grad phi . n)^2`` per node."""
    nn = np.einsum("ij,ij->i", n, n)
    gg = np.einsum("ij,ij->i", grad, grad)
    gn = np.einsum("ij,ij->i", grad, n)
    return nn * gg - gn * gn


def _h_penalty(n, grad):
    """``| |grad phi| n - grad phi |^2`` per node."""
    gnorm = np.linalg.norm(grad, axis=1)
    r = gnorm[:, None] * n - grad
    return np.einsum("ij,ij->i", r, r)


def anchoring_energy(mesh, s, n, anch, s_star, lumped=None):
    """Weak or penalised-Dirichlet anchoring energy (0 for ``kind="none"``)."""
    if anch.kind == NONE or anch.K_a == 0.0:
        return 0.0
    w = _lumped(mesh, lumped)
    grad = anch.phase.grad
    s = np.asarray(s, dtype=float)
    h = _h_weak(n, grad) if anch.kind == WEAK else _h_penalty(n, grad)
    r = s - anch.target(len(s), s_star)
    G = anch.grad_mass(mesh)
    return float(0.5 * anch.weight * (np.sum(w * s * s * h) + r @ (G @ r)))


def weak_anchor_energy(mesh, s, n, anch, s_star, lumped=None):
    if anch.kind != WEAK:
        raise ValueError("weak_anchor_energy needs kind='weak'")
    return anchoring_energy(mesh, s, n, anch, s_star, lumped)


def penalty_energy(mesh, s, n, anch, s_star, lumped=None):
    if anch.kind != PENALTY:
        raise ValueError("penalty_energy needs kind='dirichlet_penalty'")
    return anchoring_energy(mesh, s, n, anch, s_star, lumped)


def anchoring_director_terms(mesh, s, anch, lumped=None):
    """Node blocks ``(n, d, d)`` and rhs ``(n, d)`` of the director variation."""
    nv, d = mesh.n_vertices, mesh.dim
    if anch.kind == NONE or anch.K_a == 0.0:
        return np.zeros((nv, d, d)), np.zeros((nv, d))
    grad = anch.phase.grad
    w = _lumped(mesh, lumped)
    coef = anch.weight * w * np.asarray(s, dtype=float) ** 2
    gg = np.einsum("ij,ij->i", grad, grad)
    eye = np.eye(d)[None]
    if anch.kind == WEAK:
        H = coef[:, None, None] * (gg[:, None, None] * eye - np.einsum("ia,ib->iab", grad, grad))
        return H, np.zeros((nv, d))
    H = (coef * gg)[:, None, None] * eye
    rhs = (coef * np.sqrt(gg))[:, None] * grad
    return H, rhs


def weak_anchor_director_matrix(mesh, s, anch, lumped=None):
    return anchoring_director_terms(mesh, s, anch, lumped)[0]


def penalty_director_terms(mesh, s, anch, lumped=None):
    return anchoring_director_terms(mesh, s, anch, lumped)


def anchoring_s_terms(mesh, n, anch, s_star, lumped=None):
    """``(matrix, rhs)`` with ``matrix @ s - rhs`` the gradient in ``s``."""
    nv = mesh.n_vertices
    if anch.kind == NONE or anch.K_a == 0.0:
        return sp.csr_matrix((nv, nv)), np.zeros(nv)
    w = _lumped(mesh, lumped)
    grad = anch.phase.grad
    h = _h_weak(n, grad) if anch.kind == WEAK else _h_penalty(n, grad)
    G = anch.grad_mass(mesh)
    mat = anch.weight * (sp.diags(w * h) + G)
    rhs = anch.weight * (G @ anch.target(nv, s_star))
    return sp.csr_matrix(mat), rhs


def weak_anchor_s_terms(mesh, n, anch, s_star, lumped=None):
    return anchoring_s_terms(mesh, n, anch, s_star, lumped)


def penalty_s_terms(mesh, n, anch, s_star, lumped=None):
    return anchoring_s_terms(mesh, n, anch, s_star, lumped)


def penalty_forms(mesh, s, n, anch, lumped=None):
    """Lumped penalty forms ``(a_s(s,s;n), a_n(n,n;s), l(n;s), int I_h(s^2 |grad phi|^2))``."""
    w = _lumped(mesh, lumped)
    grad = anch.phase.grad
    s2 = np.asarray(s, dtype=float) ** 2
    gg = np.einsum("ij,ij->i", grad, grad)
    a_s = np.sum(w * s2 * _h_penalty(n, grad))
    a_n = np.sum(w * s2 * gg * np.einsum("ij,ij->i", n, n))
    ell = np.sum(w * s2 * np.sqrt(gg) * np.einsum("ij,ij->i", grad, n))
    return float(a_s), float(a_n), float(ell), float(np.sum(w * s2 * gg))


# electric field ----------------------------------------------------------


@dataclass(frozen=True)
class ElectricModel:
    """Constant field ``E`` with dielectric constants.

    ``gamma_a`` defaults to ``eps_a / (3 eps_bar)``; an explicit value that
    disagrees only triggers a warning.
    """

    K_ext: float = 0.0
    E: tuple = (0.0, 0.0, 0.0)
    eps_bar: float = 1.0
    eps_a: float = 0.0
    gamma_a: float = None

    def __post_init__(self):
        object.__setattr__(self, "E", tuple(float(e) for e in self.E))
        ratio = self.eps_a / (3.0 * self.eps_bar) if self.eps_bar else 0.0
        if self.gamma_a is None:
            object.__setattr__(self, "gamma_a", ratio)
        elif abs(self.gamma_a - ratio) > 1e-12 * max(1.0, abs(ratio)):
            warnings.warn(f"gamma_a={self.gamma_a} differs from eps_a/(3 eps_bar)={ratio:.6g}",
                          stacklevel=3)

    @property
    def active(self):
        return self.K_ext != 0.0 and any(self.E)

    def field(self, dim):
        E = np.asarray(self.E, dtype=float)
        if E.size < dim:
            E = np.concatenate([E, np.zeros(dim - E.size)])
        elif E.size > dim:
            if np.any(E[dim:] != 0.0):
                raise ValueError(f"field {self.E} has components beyond dimension {dim}")
            E = E[:dim]
        return E


def electric_energy(mesh, s, n, elec, lumped=None):
    """``(K/2)(-eps_bar int (1 - gamma s)|E|^2 + e_h(s, n, n) - |eps_a| int |E|^2)``."""
    if elec.K_ext == 0.0:
        return 0.0
    w = _lumped(mesh, lumped)
    E = elec.field(mesh.dim)
    E2 = float(E @ E)
    s = np.asarray(s, dtype=float)
    vol = w.sum()
    bulk = -elec.eps_bar * E2 * (vol - elec.gamma_a * np.dot(w, s))
    En = n @ E
    e_h = np.sum(w * (abs(elec.eps_a) * E2 * np.einsum("ij,ij->i", n, n) - elec.eps_a * s * En**2))
    return float(0.5 * elec.K_ext * (bulk + e_h - abs(elec.eps_a) * E2 * vol))


def electric_director_matrix(mesh, s, elec, lumped=None):
    """Node blocks ``K w_i (|eps_a||E|^2 I - eps_a s_i E E^T)``."""
    d = mesh.dim
    nv = mesh.n_vertices
    if elec.K_ext == 0.0:
        return np.zeros((nv, d, d))
    w = _lumped(mesh, lumped)
    E = elec.field(d)
    s = np.asarray(s, dtype=float)
    iso = abs(elec.eps_a) * float(E @ E)
    H = iso * np.eye(d)[None] - elec.eps_a * s[:, None, None] * np.outer(E, E)[None]
    return (elec.K_ext * w)[:, None, None] * H


def electric_s_rhs(mesh, n, elec, lumped=None):
    """Gradient of the (linear in ``s``) electric energy with respect to nodal ``s``."""
    nv = mesh.n_vertices
    if elec.K_ext == 0.0:
        return np.zeros(nv)
    w = _lumped(mesh, lumped)
    E = elec.field(mesh.dim)
    En = n @ E
    return 0.5 * elec.K_ext * (elec.eps_bar * elec.gamma_a * float(E @ E) * w
                               - elec.eps_a * w * En**2)
