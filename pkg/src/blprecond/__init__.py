"""Preconditioned Krylov solvers for singularly perturbed convection-diffusion
problems discretised by upwinding on Shishkin meshes."""

from .mesh import (LayerCase, Mesh1D, Mesh2D, RegionPartition, build_shishkin_1d, build_shishkin_2d,
                   partition_1d, partition_regions)
from .problem import Problem1D, Problem2D, example_1d, exponential_case, manufactured_case, parabolic_case
from .discretize import assemble_upwind_1d, assemble_upwind_2d
from .precond1d import build_preconditioner_1d
from .precond2d import build_block_preconditioner
from .krylov import SolveStats, StoppingRule, fgmres_2d, gmres_1d

__all__ = [
    "LayerCase", "Mesh1D", "Mesh2D", "RegionPartition", "build_shishkin_1d", "build_shishkin_2d",
    "partition_1d", "partition_regions", "Problem1D", "Problem2D", "example_1d", "exponential_case",
    "manufactured_case", "parabolic_case", "assemble_upwind_1d", "assemble_upwind_2d",
    "build_preconditioner_1d", "build_block_preconditioner", "SolveStats", "StoppingRule",
    "fgmres_2d", "gmres_1d",
]
