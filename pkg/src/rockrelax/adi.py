"""Alternating minimisation over the control ``z`` and the perturbation ``t``.

The driver starts from ``t = 0``, minimises in ``z``, then in ``t`` with
``z`` fixed, and repeats until successive ``t`` iterates are closer than
``t_tol`` in the problem's own distance.  ``z`` is warm-started from the
previous outer iterate.

A problem must provide ``solve_z(z0, t) -> (z, report)``,
``solve_t(z, t0) -> (t, report_or_None)``, ``objective(z, t)``,
``t_distance(a, b)`` and a ``t_bounds()`` method or attribute from which
the initial ``t`` shape is taken.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .optimizers import OptimizerReport, Termination


class TMetric(str, Enum):
    L1 = "l1"
    L2_QUADRATURE = "L2_quadrature"


class ZSolver(str, Enum):
    BFGS = "bfgs"
    LBFGS = "lbfgs"


class TSolver(str, Enum):
    LP = "lp"
    PROJECTED_GD = "projected_gd"


@dataclass
class ADIConfig:
    t_tol: float = 1e-5
    t_metric: TMetric = TMetric.L1
    max_outer: int = 50
    z_solver: ZSolver = ZSolver.BFGS
    t_solver: TSolver = TSolver.LP

    def __post_init__(self):
        if self.t_tol <= 0:
            raise ValueError("t_tol must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        self.t_metric = TMetric(self.t_metric)
        self.z_solver = ZSolver(self.z_solver)
        self.t_solver = TSolver(self.t_solver)


@dataclass
class TraceRow:
    outer_iter: int
    phase: str
    objective: float
    t_distance: float
    inner_iters: int
    inner_evals: int


@dataclass
class ADIResult:
    z: np.ndarray
    t: np.ndarray
    trace: list[TraceRow] = field(default_factory=list)
    converged: bool = False
    outer_iterations: int = 0
    z_reports: list[OptimizerReport] = field(default_factory=list)
    t_reports: list[OptimizerReport] = field(default_factory=list)
    trace_evals: int = 0

    @property
    def total_z_iterations(self) -> int:
        return sum(r.iterations for r in self.z_reports)

    @property
    def total_z_evals(self) -> int:
        return sum(r.objective_evals for r in self.z_reports)


def _initial_t(problem):
    lo, _ = problem.t_bounds()
    return np.zeros(len(lo))


def _failed(report) -> bool:
    return report is not None and report.termination_reason == Termination.LINE_SEARCH_FAILURE


def run_adi(problem, z0, cfg: ADIConfig | None = None) -> ADIResult:
    """Alternate z- and t-steps; see the module docstring for the protocol."""
    cfg = cfg or ADIConfig()
    z = np.array(z0, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("initial control must be finite")
    t = _initial_t(problem)
    result = ADIResult(z=z, t=t)
    consecutive_failures = 0
    for k in range(1, cfg.max_outer + 1):
        z, zrep = problem.solve_z(z, t)
        result.z_reports.append(zrep)
        result.trace.append(TraceRow(k, "z", problem.objective(z, t), float("nan"),
                                     zrep.iterations, zrep.objective_evals))
        result.trace_evals += 1

        t_new, trep = problem.solve_t(z, t)
        dist = problem.t_distance(t_new, t)
        t = t_new
        if trep is not None:
            result.t_reports.append(trep)
        result.trace.append(TraceRow(k, "t", problem.objective(z, t), dist,
                                     trep.iterations if trep else 0,
                                     trep.objective_evals if trep else 0))
        result.trace_evals += 1
        result.outer_iterations = k

        if _failed(zrep) or _failed(trep):
            consecutive_failures += 1
            if consecutive_failures >= 2:
                break
        else:
            consecutive_failures = 0
        if dist < cfg.t_tol:
            result.converged = True
            break
    result.z, result.t = z, t
    return result
