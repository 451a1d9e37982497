"""Reduced-stabilization hybridized DG for the 2D Stokes problem."""

from .hdg import HdgSolution, SpaceSpec, assemble, solve_full
from .mesh import Mesh, structured_unit_square, uniform_refine

__all__ = ["HdgSolution", "Mesh", "SpaceSpec", "assemble", "solve_full", "structured_unit_square", "uniform_refine"]
__version__ = "0.1.0"
