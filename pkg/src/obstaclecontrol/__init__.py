"""Semismooth Newton solver for obstacle-constrained optimal control
on the unit square, with P1 finite elements and a primal-dual active
set inner solver."""

__version__ = "0.1.0"

from .assembly import (
    NodalFunction,
    build_matrices,
    h1_matrix,
    interpolate,
    mass_matrix,
    norm,
    restrict_to_interior,
    stiffness_matrix,
)
from .mesh import Mesh, build_friedrichs_keller, interior_nodes
from .newton import NewtonConfig, NewtonReport, run
from .obstacle import ObstacleSolution, brute_force_oracle, solve_obstacle

__all__ = [
    "Mesh",
    "NewtonConfig",
    "NewtonReport",
    "NodalFunction",
    "ObstacleSolution",
    "build_friedrichs_keller",
    "build_matrices",
    "brute_force_oracle",
    "h1_matrix",
    "interior_nodes",
    "interpolate",
    "mass_matrix",
    "norm",
    "restrict_to_interior",
    "run",
    "solve_obstacle",
    "stiffness_matrix",
]
