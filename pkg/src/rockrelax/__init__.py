"""Rockafellian relaxation for elliptic optimal control under corrupted data."""
from .adi import ADIConfig, ADIResult, run_adi
from .estimators import RockafellianOutlierFilter, SAAControl
from .exceptions import CoercivityError, ConvergenceError, InfeasibleError
from .experiments import (ExperimentConfig, MetricsReport, gamma_schedule_study,
                          relative_l2_error, run_example, theta_sweep, variance_ratio)
from .lp import TSubproblem, enumerate_vertices, solve_t_lp
from .mesh import Grid1D, build_disk_mesh, gauss_legendre, trapezoid_integrate
from .objectives import (L1ReweightedSAA, RockafellianConfig, SAAObjective1D,
                         SupportShiftObjective2D, TwoAtomRockafellian)
from .optimizers import LineSearchConfig, OptimizerReport, armijo_gd, bfgs, lbfgs, projected_gd

__version__ = "0.1.0"

__all__ = [
    "ADIConfig", "ADIResult", "run_adi",
    "RockafellianOutlierFilter", "SAAControl",
    "CoercivityError", "ConvergenceError", "InfeasibleError",
    "ExperimentConfig", "MetricsReport", "gamma_schedule_study", "relative_l2_error",
    "run_example", "theta_sweep", "variance_ratio",
    "TSubproblem", "enumerate_vertices", "solve_t_lp",
    "Grid1D", "build_disk_mesh", "gauss_legendre", "trapezoid_integrate",
    "L1ReweightedSAA", "RockafellianConfig", "SAAObjective1D", "SupportShiftObjective2D",
    "TwoAtomRockafellian",
    "LineSearchConfig", "OptimizerReport", "armijo_gd", "bfgs", "lbfgs", "projected_gd",
]
