"""Monotone quasi-gradient flow for the discrete Ericksen energy.

One iteration: (a) minimise the energy (plus ``rho ||t||^2``) over nodal
tangent updates ``t`` of the director, (b) renormalise ``n + t`` nodally,
(c) take an implicit convex-split gradient step in ``s``. On weakly acute
meshes the total energy decreases by at least ``||s^{k+1}-s^k||^2 / dt``.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import fem
from .energy import (
    NONE,
    AnchoringModel,
    DoubleWell,
    ElectricModel,
    anchoring_director_terms,
    anchoring_energy,
    anchoring_s_terms,
    double_well_rhs,
    electric_director_matrix,
    electric_energy,
    electric_s_rhs,
)
from .sparse import SolverError, apply_dirichlet, cg_solve, from_coo

log = logging.getLogger(__name__)


@dataclass
class LCState:
    """Nodal degree of orientation ``s`` (n,) and unit director ``n`` (n, d)."""

    s: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        self.s = np.array(self.s, dtype=float)
        self.n = np.array(self.n, dtype=float)
        if self.n.ndim != 2 or self.n.shape[0] != self.s.shape[0]:
            raise ValueError(f"state shapes disagree: s {self.s.shape}, n {self.n.shape}")

    @property
    def u(self):
        return fem.compute_u(self.s, self.n)

    def copy(self):
        return LCState(self.s.copy(), self.n.copy())

    def unit_defect(self):
        """Largest nodal deviation ``| |n_i| - 1 |``."""
        return float(np.max(np.abs(np.linalg.norm(self.n, axis=1) - 1.0)))


def normalize_rows(v):
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot normalise a zero vector")
    return v / norm


@dataclass
class BoundaryConditions:
    """Dirichlet data: ``s[s_nodes] = s_values`` and ``n[n_nodes] = n_values``.

    Boundary parts without data are natural (homogeneous Neumann).
    """

    s_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    s_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    n_values: np.ndarray = None

    def __post_init__(self):
        self.s_nodes = np.asarray(self.s_nodes, dtype=np.int64)
        self.n_nodes = np.asarray(self.n_nodes, dtype=np.int64)
        self.s_values = np.broadcast_to(np.asarray(self.s_values, dtype=float),
                                        self.s_nodes.shape).copy()
        if self.n_values is None:
            self.n_values = np.zeros((self.n_nodes.size, 0))
        self.n_values = np.atleast_2d(np.asarray(self.n_values, dtype=float))
        if self.n_nodes.size:
            if self.n_values.shape[0] == 1 and self.n_nodes.size > 1:
                self.n_values = np.repeat(self.n_values, self.n_nodes.size, axis=0)
            if self.n_values.shape[0] != self.n_nodes.size:
                raise ValueError("one director value per Dirichlet node required")
            if np.max(np.abs(np.linalg.norm(self.n_values, axis=1) - 1.0)) > 1e-12:
                raise ValueError("Dirichlet directors must be unit vectors")
        if self.s_nodes.size and self.n_nodes.size:
            if not np.all(np.isin(self.n_nodes, self.s_nodes)):
                raise ValueError("director Dirichlet nodes must also carry s data")

    def apply(self, state):
        out = state.copy()
        out.s[self.s_nodes] = self.s_values
        if self.n_nodes.size:
            out.n[self.n_nodes] = self.n_values
        return out

    def satisfied_by(self, state):
        ok = np.array_equal(state.s[self.s_nodes], self.s_values)
        if self.n_nodes.size:
            ok = ok and np.array_equal(state.n[self.n_nodes], self.n_values)
        return bool(ok)


@dataclass
class FlowParams:
    """Iteration controls.

    Attributes
    ----------
    dt : pseudo time step (any positive value keeps the energy monotone)
    rho : minimizing-movement weight; ``None`` means ``1e-8 * volume``
    tol : stop once ``(||ds||_L2 + ||dn||_L2) / dt < tol``
    tangent_mode : ``"auto"``, ``"coupled"`` or ``"decoupled"``
    """

    dt: float = 0.1
    rho: float = None
    max_iters: int = 1000
    tol: float = 1e-6
    cg_tol_director: float = 1e-8
    cg_tol_s: float = 1e-12
    cg_max_iters: int = None
    tangent_mode: str = "auto"
    check_monotone: bool = True
    monotone_slack: float = 1e-10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.tangent_mode not in ("auto", "coupled", "decoupled"):
            raise ValueError(f"unknown tangent mode {self.tangent_mode!r}")


@dataclass
class EnergyBreakdown:
    E1: float
    E2: float
    Ea: float
    Eext: float

    @property
    def total(self):
        return self.E1 + self.E2 + self.Ea + self.Eext

    def as_dict(self):
        return {"E1": self.E1, "E2": self.E2, "Ea": self.Ea, "Eext": self.Eext,
                "total": self.total}


@dataclass
class IterationRecord:
    iter: int
    energy: EnergyBreakdown
    ds_l2: float
    dn_l2: float
    wall_seconds: float


class FlowAbort(RuntimeError):
    """Energy increased beyond the allowed slack; carries the offending states."""

    def __init__(self, message, state=None, previous=None, energies=None):
        super().__init__(message)
        self.state = state
        self.previous = previous
        self.energies = energies


class EnergyModel:
    """Mesh, constants and cached matrices for the total discrete energy."""

    def __init__(self, mesh, kappa=1.0, double_well=None, anchoring=None, electric=None):
        self.mesh = mesh
        self.kappa = float(kappa)
        self.dw = DoubleWell() if double_well is None else double_well
        self.anchoring = AnchoringModel() if anchoring is None else anchoring
        self.electric = ElectricModel() if electric is None else electric
        self.K = fem.assemble_stiffness(mesh)
        self.M = fem.assemble_mass(mesh)
        self.lumped = fem.assemble_lumped_mass(mesh)
        self.edges = fem.edge_weights(self.K)
        self.volume = float(self.lumped.sum())

    @property
    def s_star(self):
        return self.dw.s_star

    @property
    def pure_ericksen(self):
        return not self.anchoring.active and not self.electric.active

    def energy(self, state):
        mesh = self.mesh
        E1 = fem.energy_E1h(self.edges, state.s, state.n, self.kappa)
        E2 = fem.energy_E2h(mesh, state.s, self.dw) if self.dw.enabled else 0.0
        Ea = anchoring_energy(mesh, state.s, state.n, self.anchoring, self.s_star, self.lumped)
        Eext = electric_energy(mesh, state.s, state.n, self.electric, self.lumped)
        return EnergyBreakdown(E1, E2, Ea, Eext)

    def director_blocks(self, s):
        """Node blocks ``(n, d, d)`` and rhs ``(n, d)`` of the non-Ericksen director terms."""
        H, rhs = anchoring_director_terms(self.mesh, s, self.anchoring, self.lumped)
        if self.electric.K_ext != 0.0:
            H = H + electric_director_matrix(self.mesh, s, self.electric, self.lumped)
        return H, rhs

    def l2_norm(self, v):
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(max(np.sum(v * (self.M @ v)), 0.0)))


def energy_total(state, model):
    return model.energy(state)


# step (a) ----------------------------------------------------------------


def tangent_frame(n):
    """Orthonormal tangent basis at every node, shape ``(n, d, d-1)``.

    2-D: ``q = n`` rotated by +90 degrees. 3-D: ``e`` is the canonical axis
    where ``|n|`` is smallest (ties go to the later axis), ``q = e x n / |e x n|``
    and ``w = n x q``.
    """
    n = np.asarray(n, dtype=float)
    d = n.shape[1]
    if d == 2:
        q = np.column_stack([-n[:, 1], n[:, 0]])
        return q[:, :, None]
    if d != 3:
        raise ValueError("directors must be 2- or 3-dimensional")
    idx = 2 - np.argmin(np.abs(n)[:, ::-1], axis=1)
    e = np.zeros_like(n)
    e[np.arange(len(n)), idx] = 1.0
    q = normalize_rows(np.cross(e, n))
    w = np.cross(n, q)
    return np.stack([q, w], axis=2)


@dataclass
class DirectorSystem:
    """Tangent-space system of step (a).

    ``blocks`` holds one ``(matrix, rhs, free_nodes)`` triple for the coupled
    system, or one per tangent direction when decoupled. Unknowns of the
    coupled system are ordered node-major: ``free_node * (d-1) + a``.
    """

    blocks: list
    frame: np.ndarray
    decoupled: bool
    cross_term: float


def _laplacian_coo(model, s):
    L = fem.director_laplacian(model.edges, s).tocoo()
    return L.row, L.col, L.data


def _project_pairs(rows, cols, data, P, a, b):
    return data * np.einsum("kd,kd->k", P[rows, :, a], P[cols, :, b])


def assemble_director_system(state, model, params, bc=None, mode=None):
    """Tangent-space matrices and right-hand sides for step (a).

    The full-space quadratic is ``1/2 N^T A N - l^T N`` with ``A`` the
    director Laplacian per component plus anchoring/electric node blocks,
    augmented by ``2 rho w_i I`` for the minimizing-movement term. With the
    frame ``P_i`` the tangent system reads ``(P^T A P) tau = P^T (l - A N)``.
    """
    mode = params.tangent_mode if mode is None else mode
    n = state.n
    nv, d = n.shape
    k = d - 1
    P = tangent_frame(n)
    rho = params.rho if params.rho is not None else 1e-8 * model.volume

    free = np.ones(nv, dtype=bool)
    if bc is not None and bc.n_nodes.size:
        free[bc.n_nodes] = False
    new_id = -np.ones(nv, dtype=np.int64)
    new_id[free] = np.arange(free.sum())
    nf = int(free.sum())

    rows, cols, data = _laplacian_coo(model, state.s)
    H, ell = model.director_blocks(state.s)
    grad = np.asarray(fem.director_laplacian(model.edges, state.s) @ n)
    grad += np.einsum("iab,ib->ia", H, n) - ell
    rhs_full = -np.einsum("ida,id->ia", P, grad)  # (nv, k)

    H_rho = H + (2.0 * rho * model.lumped)[:, None, None] * np.eye(d)[None]
    Ht = np.einsum("ida,ide,ieb->iab", P, H_rho, P)  # (nv, k, k)

    keep = free[rows] & free[cols]
    rows, cols, data = rows[keep], cols[keep], data[keep]
    fr, fc = new_id[rows], new_id[cols]
    fnodes = np.nonzero(free)[0]

    cross = 0.0
    if k == 2:
        vals = _project_pairs(rows, cols, data, P, 0, 1)
        node_cross = np.abs(Ht[fnodes, 0, 1])
        cross = float(max(np.abs(vals).max(initial=0.0), node_cross.max(initial=0.0)))
    scale = float(np.abs(data).max(initial=0.0)) + float(np.abs(Ht).max(initial=0.0))
    if mode == "decoupled":
        decoupled = True
    elif mode == "coupled" or k == 1:
        decoupled = False
    else:
        decoupled = model.pure_ericksen and cross <= 1e-12 * max(scale, 1e-300)

    blocks = []
    if decoupled or k == 1:
        for a in range(k):
            vals = _project_pairs(rows, cols, data, P, a, a)
            r = np.concatenate([fr, np.arange(nf)])
            c = np.concatenate([fc, np.arange(nf)])
            v = np.concatenate([vals, Ht[fnodes, a, a]])
            A = from_coo(nf, nf, r, c, v)
            blocks.append((A, rhs_full[fnodes, a].copy(), fnodes))
    else:
        r_list, c_list, v_list = [], [], []
        for a in range(k):
            for b in range(k):
                r_list += [fr * k + a, np.arange(nf) * k + a]
                c_list += [fc * k + b, np.arange(nf) * k + b]
                v_list += [_project_pairs(rows, cols, data, P, a, b), Ht[fnodes, a, b]]
        A = from_coo(nf * k, nf * k, np.concatenate(r_list), np.concatenate(c_list),
                     np.concatenate(v_list))
        blocks.append((A, rhs_full[fnodes].ravel(), fnodes))
    return DirectorSystem(blocks, P, bool(decoupled and k > 1), cross)


def _cg(A, b, x0, tol, params, what):
    x, rep = cg_solve(A, b, x0=x0, tol=tol, max_iters=params.cg_max_iters)
    if not rep.converged:
        raise SolverError(f"CG for {what} did not converge: {rep.iterations} iterations, "
                          f"residual {rep.final_residual_norm:.3e} "
                          f"(initial {rep.initial_residual_norm:.3e})")
    return x, rep


def solve_director_system(system, nv, params):
    """Tangent update ``t`` (nodal, orthogonal to ``n``) from an assembled system."""
    P = system.frame
    d, k = P.shape[1], P.shape[2]
    tau = np.zeros((nv, k))
    for a, (A, rhs, fnodes) in enumerate(system.blocks):
        if rhs.size == 0:
            continue
        x, _ = _cg(A, rhs, None, params.cg_tol_director, params, "the director step")
        if system.decoupled or k == 1:
            tau[fnodes, a] = x
        else:
            tau[fnodes] = x.reshape(-1, k)
    return np.einsum("ida,ia->id", P, tau)


def step_a_minimize(state, model, params, bc=None):
    system = assemble_director_system(state, model, params, bc)
    return solve_director_system(system, len(state.s), params)


def step_b_project(n, t):
    v = np.asarray(n, dtype=float) + np.asarray(t, dtype=float)
    norm = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(norm < 1.0 - 1e-12):
        raise FloatingPointError("projection received a node with |n + t| < 1")
    return v / norm


# step (c) ----------------------------------------------------------------


def s_system(state, model, params):
    """Matrix and rhs of the implicit convex-split ``s`` step (before Dirichlet data)."""
    dt = params.dt
    mesh = model.mesh
    D = fem.assemble_D_of_n(model.edges, state.n)
    A_a, r_a = anchoring_s_terms(mesh, state.n, model.anchoring, model.s_star, model.lumped)
    A = (1.0 + 2.0 * model.dw.c0 * dt) * model.M \
        + dt * (2.0 * model.kappa * model.K + sp.diags(D) + A_a)
    rhs = model.M @ state.s + dt * r_a
    if model.dw.enabled:
        rhs += dt * double_well_rhs(mesh, model.dw, state.s)
    if model.electric.K_ext != 0.0:
        rhs -= dt * electric_s_rhs(mesh, state.n, model.electric, model.lumped)
    return sp.csr_matrix(A), rhs


def step_c_s_update(state, model, params, bc=None):
    """Solve for ``s^{k+1}`` given ``(s^k, n^{k+1})`` in ``state``."""
    A, rhs = s_system(state, model, params)
    x0 = state.s.copy()
    if bc is not None and bc.s_nodes.size:
        A, rhs = apply_dirichlet(A, rhs, bc.s_nodes, bc.s_values)
        x0[bc.s_nodes] = bc.s_values
    s_new, _ = _cg(A, rhs, x0, params.cg_tol_s, params, "the s step")
    if bc is not None and bc.s_nodes.size:
        s_new[bc.s_nodes] = bc.s_values
    return s_new


# driver ------------------------------------------------------------------


@dataclass
class FlowResult:
    state: LCState
    log: list
    initial_energy: EnergyBreakdown
    converged: bool

    @property
    def iterations(self):
        return len(self.log)

    @property
    def final_energy(self):
        return self.log[-1].energy if self.log else self.initial_energy

    def __iter__(self):
        return iter((self.state, self.log))


def iterate_once(state, model, params, bc=None):
    """One full (a)-(b)-(c) iteration; returns the new state."""
    t = step_a_minimize(state, model, params, bc)
    n_new = step_b_project(state.n, t)
    if bc is not None and bc.n_nodes.size:
        n_new[bc.n_nodes] = bc.n_values
    mid = LCState(state.s, n_new)
    s_new = step_c_s_update(mid, model, params, bc)
    return LCState(s_new, n_new)


def run_flow(initial, model, bc=None, params=None, callback=None):
    """Iterate until stationary or ``max_iters``; returns a :class:`FlowResult`.

    Raises :class:`FlowAbort` if an iteration violates the energy decrease
    ``E_new <= E_old - ||ds||^2/dt`` by more than ``monotone_slack * |E|``.
    ``callback(k, state, record)`` is called after every iteration.
    """
    params = FlowParams() if params is None else params
    state = bc.apply(initial) if bc is not None else initial.copy()
    if state.unit_defect() > 1e-12:
        state.n = normalize_rows(state.n)
    energy = model.energy(state)
    initial_energy = energy
    records = []
    converged = False
    t0 = time.perf_counter()
    for k in range(1, params.max_iters + 1):
        new = iterate_once(state, model, params, bc)
        new_energy = model.energy(new)
        ds = new.s - state.s
        ds_l2 = model.l2_norm(ds)
        dn_l2 = model.l2_norm(new.n - state.n)
        bound = energy.total - ds_l2**2 / params.dt
        slack = params.monotone_slack * max(abs(energy.total), abs(new_energy.total))
        if params.check_monotone and new_energy.total > bound + slack:
            raise FlowAbort(
                f"energy increase at iteration {k}: {energy.total:.15g} -> "
                f"{new_energy.total:.15g} (bound {bound:.15g})",
                state=new, previous=state, energies=(energy, new_energy))
        lo, hi = float(new.s.min()), float(new.s.max())
        if lo <= -0.5 or hi >= 1.0:
            log.warning("iteration %d: s range [%.4g, %.4g] leaves (-1/2, 1)", k, lo, hi)
        rec = IterationRecord(k, new_energy, ds_l2, dn_l2, time.perf_counter() - t0)
        records.append(rec)
        if callback is not None:
            callback(k, new, rec)
        state, energy = new, new_energy
        if (ds_l2 + dn_l2) / params.dt < params.tol:
            converged = True
            break
    return FlowResult(state, records, initial_energy, converged)


# defects -----------------------------------------------------------------


@dataclass
class DefectReport:
    nodes: np.ndarray
    centroid: np.ndarray
    radius_max: float
    radius_mean: float
    radius_median: float
    n_components: int
    component_sizes: list

    @property
    def count(self):
        return int(self.nodes.size)


def defect_set(s, threshold, mesh=None, axis_point=None, axis=(0.0, 0.0, 1.0), exclude=None):
    """Nodes with ``|s_i| < threshold`` plus geometric diagnostics.

    Radii are distances from the line through ``axis_point`` (default: the
    defect centroid) along ``axis``, i.e. planar distances for a ring
    around that line. Connected components use mesh edges. ``exclude`` is
    an optional boolean node mask (e.g. the colloid interior) left out of
    the search.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    s = np.asarray(s, dtype=float)
    hit = np.abs(s) < threshold
    if exclude is not None:
        hit &= ~np.asarray(exclude, dtype=bool)
    nodes = np.nonzero(hit)[0]
    if mesh is None or nodes.size == 0:
        dim = mesh.dim if mesh is not None else 0
        return DefectReport(nodes, np.full(dim, np.nan), 0.0, 0.0, 0.0,
                            0 if nodes.size == 0 else 1, [int(nodes.size)] if nodes.size else [])
    x = mesh.vertices[nodes]
    centroid = x.mean(axis=0)
    p = centroid if axis_point is None else np.asarray(axis_point, dtype=float)
    a = np.asarray(axis, dtype=float)[: mesh.dim]
    a = a / np.linalg.norm(a)
    rel = x - p
    radial = rel - np.outer(rel @ a, a)
    r = np.linalg.norm(radial, axis=1)

    e = mesh.edges()
    sel = np.zeros(mesh.n_vertices, dtype=bool)
    sel[nodes] = True
    e = e[sel[e[:, 0]] & sel[e[:, 1]]]
    local = -np.ones(mesh.n_vertices, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    m = nodes.size
    graph = sp.coo_matrix((np.ones(len(e)), (local[e[:, 0]], local[e[:, 1]])), shape=(m, m))
    ncomp, labels = connected_components(graph, directed=False)
    sizes = sorted(np.bincount(labels).tolist(), reverse=True)
    return DefectReport(nodes, centroid, float(r.max()), float(r.mean()), float(np.median(r)),
                        int(ncomp), sizes)

