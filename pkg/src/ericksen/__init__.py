"""Equilibria of the Ericksen liquid-crystal model on P1 finite elements.

The solver is a monotone quasi-gradient flow for the one-constant Ericksen
energy with variable degree of orientation, optionally including colloids
(immersed-boundary phase field) and a constant electric field.
"""
__version__ = "0.1.0"

from .kernels import BACKEND
from .mesh import Mesh, apply_shear_map, build_cube_mesh, build_square_mesh, refine_red

__all__ = [
    "BACKEND",
    "Mesh",
    "__version__",
    "apply_shear_map",
    "build_cube_mesh",
    "build_square_mesh",
    "refine_red",
]
