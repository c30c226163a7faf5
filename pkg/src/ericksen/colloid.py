"""Rigid colloids as signed distances and smeared phase fields.

The phase field is ``phi = phi_ref(d(x))`` with an arctan profile of width
``eps``: close to 0 inside the colloid, close to 1 in the liquid crystal.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

C0 = 4.0 * np.pi


@dataclass(frozen=True)
class RigidMotion:
    """Map ``F(x) = R x + b`` from the physical to the reference frame."""

    R: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        d = R.shape[0]
        if R.shape != (d, d) or not np.allclose(R.T @ R, np.eye(d), atol=1e-12):
            raise ValueError("rotation matrix must be orthogonal")
        if np.linalg.det(R) <= 0:
            raise ValueError("rotation matrix must have determinant +1")

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), np.zeros(dim))

    def apply(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.R).T + np.asarray(self.b)


@dataclass(frozen=True)
class Sphere:
    """Ball (disk in 2-D) of ``radius`` around ``center`` in reference coordinates."""

    radius: float
    center: np.ndarray
    motion: RigidMotion = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        c = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)
        if self.motion is None:
            object.__setattr__(self, "motion", RigidMotion.identity(c.size))

    @property
    def dim(self):
        return self.center.size

    def physical_center(self):
        """Point whose image under the motion is the reference center."""
        R = np.asarray(self.motion.R)
        return R.T @ (self.center - np.asarray(self.motion.b))

    def distance(self, x):
        """Signed distance, positive inside."""
        y = self.motion.apply(x)
        return self.radius - np.linalg.norm(y - self.center, axis=-1)

    def distance_gradient(self, x):
        """``grad d(x) = R^T grad d_hat(F(x))``; zero at the center."""
        y = self.motion.apply(x)
        diff = y - self.center
        r = np.linalg.norm(diff, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            ghat = np.where(r > 0, -diff / np.where(r > 0, r, 1.0), 0.0)
        return ghat @ np.asarray(self.motion.R)


def signed_distance(shape, x):
    return shape.distance(x)


def phase_ref(t, eps):
    """``0.5 * ((2/pi) arctan(-t/eps) + 1)``."""
    return 0.5 * ((2.0 / np.pi) * np.arctan(-np.asarray(t, dtype=float) / eps) + 1.0)


def phase_ref_deriv(t, eps):
    t = np.asarray(t, dtype=float)
    return -1.0 / (np.pi * eps) / (1.0 + (t / eps) ** 2)


@dataclass
class PhaseField:
    """Nodal phase field and its analytic nodal gradient.

    Attributes
    ----------
    eps : float
    phi : (nv,) array
    grad : (nv, d) array
        ``grad phi`` evaluated at the nodes; its P1 interpolant is ``I_h grad phi``.
    """

    eps: float
    phi: np.ndarray
    grad: np.ndarray
    shape: object = field(default=None, repr=False)

    @property
    def grad_sq(self):
        return np.einsum("ij,ij->i", self.grad, self.grad)

    @property
    def grad_norm(self):
        return np.sqrt(self.grad_sq)


def build_phase_field(mesh, shape, eps, warn_resolution=True):
    """Nodal ``phi = phi_ref(d)`` and ``grad phi = phi_ref'(d) grad d``."""
    if not eps > 0:
        raise ValueError("phase-field width eps must be positive")
    lo, hi = mesh.bounding_box()
    c = shape.physical_center()
    if np.any(c - shape.radius <= lo) or np.any(c + shape.radius >= hi):
        raise ValueError("colloid must lie strictly inside the domain")
    if warn_resolution and eps < 2.0 * _min_edge(mesh):
        warnings.warn(f"phase-field width eps={eps} is below twice the mesh size",
                      stacklevel=2)
    x = mesh.vertices
    d = shape.distance(x)
    phi = phase_ref(d, eps)
    grad = phase_ref_deriv(d, eps)[:, None] * shape.distance_gradient(x)
    return PhaseField(float(eps), phi, grad, shape)


def _min_edge(mesh):
    return float(mesh.edge_lengths().min())


def perimeter_functional(mesh, f, pf, lumped=None):
    """``C0 (eps/2) int I_h(f |grad phi|^2)`` with lumped masses."""
    from .fem import assemble_lumped_mass

    w = assemble_lumped_mass(mesh) if lumped is None else lumped
    f = np.broadcast_to(np.asarray(f, dtype=float), w.shape)
    return float(C0 * 0.5 * pf.eps * np.sum(w * f * pf.grad_sq))
