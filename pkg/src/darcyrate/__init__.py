"""Numerical homogenization of Stokes flow in perforated domains.

The pipeline runs cell problems, then the Darcy pressure, then the fine
perforated solve, then the correctors, and finally the rate study.
"""
from .cell_problems import CellSolution, permeability, solve_all, solve_cell_problems
from .correctors import build_correctors, oscillating_velocity
from .darcy import HomogenizedSolution, darcy_velocity, solve_p0
from .fine_stokes import FineSolution, solve_stokes
from .geometry import CellGeometry, PerforatedDomain, build_cell_geometry, build_perforated_domain, named_cell
from .study import StudyReport, convergence_study, error_metrics, fit_rate, run_verify

__all__ = [
    "CellGeometry",
    "CellSolution",
    "FineSolution",
    "HomogenizedSolution",
    "PerforatedDomain",
    "StudyReport",
    "build_cell_geometry",
    "build_correctors",
    "build_perforated_domain",
    "convergence_study",
    "darcy_velocity",
    "error_metrics",
    "fit_rate",
    "named_cell",
    "oscillating_velocity",
    "permeability",
    "run_verify",
    "solve_all",
    "solve_cell_problems",
    "solve_p0",
    "solve_stokes",
]
