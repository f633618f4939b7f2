"""Reproduction harness: true, corrupted and relaxed solves plus metrics.

Each example runs three optimisations from ``z = 1``: the uncorrupted
problem, the corrupted problem, and the Rockafellian relaxation of the
corrupted problem.  Errors are measured against the uncorrupted optimum.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .adi import ADIConfig, ADIResult, run_adi
from .lp import deleted_mask
from .mesh import Grid1D, build_disk_mesh
from .motivating import MotivatingInstance, solve_rockafellian_numeric
from .objectives import (L1ReweightedSAA, RockafellianConfig, SAAObjective1D,
                         SupportShiftObjective2D, TwoAtomRockafellian)
from .optimizers import OptimizerReport, Termination, armijo_gd
from .random_field import KKLCoefficient, corrupt_samples, sample_standard_normal

EXAMPLES = ("motivating", "ex1", "ex2", "ex3")

_DEFAULTS = {
    "motivating": {"corruption": 0.05, "theta": 1.0},
    "ex1": {"corruption": 0.05, "theta": 1.0, "alpha": 1e-4},
    "ex2": {"corruption": 0.05, "theta": 5e-2, "alpha": 1e-4, "t_tol": 1e-5},
    "ex3": {"corruption": 0.4, "theta": 0.1, "alpha": 1e-5, "t_tol": 1e-2},
}

# corruption levels of the published tables
PRESETS = {
    "ex2": (0.01, 0.02, 0.05, 0.10, 0.20, 0.40),
    "ex3": (0.3, 0.4),
}

# ex3: the uncorrupted input is the single value ``XI_CENTER``
XI_CENTER = 3.5


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    example: str = "ex1"
    corruption: float | None = None
    theta: float | None = None
    seed: int = 1234
    alpha: float | None = None
    # 1-D grid and sampling
    n_cells: int = 256
    n_samples: int = 1000
    kkl_terms: int = 50
    kkl_sigma: float = 0.4
    corruption_scale: float = 10.0
    stringent_bounds: bool = True
    # disk mesh and quadrature
    target_dof: int = 5185
    n_quad: int = 8
    # solver tolerances
    gd_tol: float = 1e-4
    gd_max_iter: int = 100_000
    bfgs_gtol: float = 1e-5
    lbfgs_gtol: float = 1e-6
    lbfgs_m: int = 7
    pgd_tol: float = 1e-6
    t_tol: float | None = None
    max_outer: int = 50
    output_dir: str | None = None

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ConfigError(f"example must be one of {EXAMPLES}, got {self.example!r}")
        for key, value in _DEFAULTS[self.example].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        if self.theta is None or self.theta <= 0:
            raise ConfigError("theta must be positive")
        c = self.corruption
        lo_open = self.example != "ex2"
        hi = 0.5 if self.example == "ex3" else 1.0
        if not ((c > 0 if lo_open else c >= 0) and c < hi):
            raise ConfigError(f"corruption {c} outside the valid range for {self.example}")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        for name in ("n_cells", "n_samples", "kkl_terms", "target_dof", "n_quad",
                     "max_outer", "lbfgs_m", "gd_max_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("gd_tol", "bfgs_gtol", "lbfgs_gtol", "pgd_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    def with_(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)


@dataclass
class MetricsReport:
    example: str
    corruption: float
    theta: float
    seed: int
    e_rel: float
    e_rel_corrupted: float
    e_ratio: float
    v_ratio: float
    linf_error: float
    corrupted_deleted: int
    corrupted_total: int
    clean_deleted: int
    clean_total: int
    outer_iterations: int
    adi_converged: bool
    iters_true: int
    evals_true: int
    iters_corrupted: int
    evals_corrupted: int
    iters_rock: int
    evals_rock: int
    converged: bool

    def __post_init__(self):
        if self.corrupted_deleted > self.corrupted_total or self.clean_deleted > self.clean_total:
            raise ValueError("deleted counts exceed totals")

    @property
    def corrupted_deleted_fraction(self) -> float:
        return self.corrupted_deleted / self.corrupted_total if self.corrupted_total else float("nan")

    @property
    def clean_deleted_fraction(self) -> float:
        return self.clean_deleted / self.clean_total if self.clean_total else float("nan")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: MetricsReport
    coords: np.ndarray
    controls: dict
    states: dict
    t_table: np.ndarray
    trace: list = field(default_factory=list)


def _safe_ratio(num: float, den: float) -> float:
    if den == 0:
        return math.inf if num > 0 else math.nan
    return num / den


def relative_l2_error(z, z_ref, metric=None) -> float:
    """``||z - z_ref|| / ||z_ref||``; ``metric`` is a weight vector or mass matrix."""
    z = np.asarray(z, dtype=float)
    z_ref = np.asarray(z_ref, dtype=float)
    if z.shape != z_ref.shape:
        raise ValueError("controls live on different meshes")

    def sq(v):
        if metric is None:
            return float(v @ v)
        if hasattr(metric, "shape") and len(metric.shape) == 2:
            return float(v @ (metric @ v))
        return float(np.sum(np.asarray(metric) * v * v))

    ref = sq(z_ref)
    if ref == 0:
        raise ZeroDivisionError("reference control has zero norm")
    return math.sqrt(sq(z - z_ref) / ref)


def _variance(norms, weights):
    norms = np.asarray(norms, dtype=float)
    if np.ptp(norms) == 0:
        return 0.0
    w = np.full(len(norms), 1.0 / len(norms)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    mean = w @ norms
    return float(w @ (norms - mean) ** 2)


def variance_ratio(u_corrupted_norms, u_rock_norms, weights=None, rock_weights=None) -> float:
    """``Var(corrupted) / Var(rock)`` of state norms; ``inf`` when the latter is 0."""
    rock_weights = weights if rock_weights is None else rock_weights
    return _safe_ratio(_variance(u_corrupted_norms, weights), _variance(u_rock_norms, rock_weights))


def _ok(*reports) -> bool:
    return all(r.termination_reason == Termination.TOLERANCE for r in reports if r is not None)


def _sum_reports(reports) -> tuple[int, int]:
    return sum(r.iterations for r in reports), sum(r.objective_evals for r in reports)


# -- per-example baselines (true and corrupted solves; independent of theta) --

@dataclass
class _Baseline:
    z_true: np.ndarray
    z_corr: np.ndarray
    rep_true: OptimizerReport
    rep_corr: OptimizerReport
    payload: dict


def _baseline_ex1(cfg):
    grid = Grid1D(cfg.n_cells)
    target = np.sin(np.pi * grid.nodes)
    true = SAAObjective1D(grid, np.full((1, grid.n_cells), 2.0), [1.0], target, cfg.alpha)
    rock = TwoAtomRockafellian(cfg.corruption, RockafellianConfig(cfg.theta, 2, cfg.alpha, target), grid)
    z0 = np.ones(grid.n_nodes)
    kw = dict(tol=cfg.gd_tol, max_iter=cfg.gd_max_iter, metric=grid.weights)
    z_true, rep_true = armijo_gd(true.value, true.gradient, z0, **kw)
    z_corr, rep_corr = armijo_gd(rock.saa.value, rock.saa.gradient, z0, **kw)
    return _Baseline(z_true, z_corr, rep_true, rep_corr, {"grid": grid, "true": true, "target": target})


def _ex2_samples(cfg):
    clean = sample_standard_normal(cfg.n_samples, cfg.kkl_terms, cfg.seed)
    M = int(round(cfg.corruption * cfg.n_samples))
    return clean, corrupt_samples(clean, M, cfg.corruption_scale)


def _baseline_ex2(cfg):
    grid = Grid1D(cfg.n_cells)
    kkl = KKLCoefficient(cfg.kkl_sigma, cfg.kkl_terms)
    clean, corrupted = _ex2_samples(cfg)
    p = np.full(cfg.n_samples, 1.0 / cfg.n_samples)
    true = SAAObjective1D(grid, kkl(grid.midpoints, clean.samples), p, None, cfg.alpha)
    corr = SAAObjective1D(grid, kkl(grid.midpoints, corrupted.samples), p, None, cfg.alpha)
    z0 = np.ones(grid.n_nodes)
    z_true, rep_true = true.solve(z0, gtol=cfg.bfgs_gtol)
    z_corr, rep_corr = corr.solve(z0, gtol=cfg.bfgs_gtol)
    return _Baseline(z_true, z_corr, rep_true, rep_corr,
                     {"grid": grid, "true": true, "corr": corr, "samples": corrupted})


def _baseline_ex3(cfg):
    mesh = build_disk_mesh(cfg.target_dof)
    kw = dict(alpha=cfg.alpha, gtol=cfg.lbfgs_gtol, m=cfg.lbfgs_m, t_tol=cfg.pgd_tol)
    true = SupportShiftObjective2D.deterministic(mesh, XI_CENTER, theta=cfg.theta, **kw)
    corr = SupportShiftObjective2D.uniform(mesh, XI_CENTER, cfg.corruption, cfg.n_quad,
                                           theta=cfg.theta, assembler=true.assembler,
                                           mass=true.M, **kw)
    z0 = np.ones(mesh.n_dof)
    z_true, rep_true = true.solve_z(z0, np.zeros(1))
    z_corr, rep_corr = corr.solve_z(z0, np.zeros(corr.n_nodes))
    return _Baseline(z_true, z_corr, rep_true, rep_corr, {"mesh": mesh, "true": true, "corr": corr})


def _baseline_motivating(cfg):
    rep = OptimizerReport(termination_reason=Termination.TOLERANCE)
    # phi(x) = (1 - x)/2 and phi_eps(x) = (1 + x)/2 are linear: minimisers at the ends
    return _Baseline(np.array([1.0]), np.array([0.0]), rep, rep, {})


_BASELINES = {"motivating": _baseline_motivating, "ex1": _baseline_ex1,
              "ex2": _baseline_ex2, "ex3": _baseline_ex3}


def baseline(cfg: ExperimentConfig) -> _Baseline:
    """True and corrupted optima; these do not depend on ``theta``."""
    return _BASELINES[cfg.example](cfg)


# -- relaxed solves and metrics --

def _finish_motivating(cfg, base):
    inst = MotivatingInstance(cfg.corruption, cfg.theta)
    x, t = solve_rockafellian_numeric(inst)
    z_rock = np.array([x])
    probs = np.array([1.0 - cfg.corruption, cfg.corruption])
    deleted = deleted_mask(probs, t)
    err = abs(x - 1.0)
    report = MetricsReport(
        cfg.example, cfg.corruption, cfg.theta, cfg.seed, err, abs(base.z_corr[0] - 1.0),
        _safe_ratio(abs(base.z_corr[0] - 1.0), err), math.nan, err,
        int(deleted[1]), 1, int(deleted[0]), 1, 0, True, 0, 0, 0, 0, 0, 0, True)
    phi = lambda v: (1.0 - v) / 2.0  # noqa: E731
    controls = {"z_true": base.z_true, "z_corrupted": base.z_corr, "z_rock": z_rock}
    states = {"Eu_true": phi(base.z_true), "Eu_corrupted": phi(base.z_corr), "Eu_rock": phi(z_rock)}
    t_table = np.column_stack([np.arange(2), probs, t, deleted])
    return ExperimentResult(cfg, report, np.zeros((1, 1)), controls, states, t_table)


def _finish_ex1(cfg, base):
    grid = base.payload["grid"]
    rock = TwoAtomRockafellian(cfg.corruption,
                               RockafellianConfig(cfg.theta, 2, cfg.alpha, base.payload["target"]),
                               grid)
    z_rock, t2, rep = rock.solve(np.ones(grid.n_nodes), 0.0, tol=cfg.gd_tol,
                                 max_iter=cfg.gd_max_iter)
    w = grid.weights
    e_rock = relative_l2_error(z_rock, base.z_true, w)
    e_corr = relative_l2_error(base.z_corr, base.z_true, w)
    t = np.array([-t2, t2])
    deleted = deleted_mask(rock.saa.probs, t)
    report = MetricsReport(
        cfg.example, cfg.corruption, cfg.theta, cfg.seed, e_rock, e_corr,
        _safe_ratio(e_corr, e_rock), math.nan, float(np.max(np.abs(z_rock - base.z_true))),
        int(deleted[0]), 1, int(deleted[1]), 1, 0, True,
        base.rep_true.iterations, base.rep_true.objective_evals,
        base.rep_corr.iterations, base.rep_corr.objective_evals,
        rep.iterations, rep.objective_evals, _ok(base.rep_true, base.rep_corr, rep))
    controls = {"z_true": base.z_true, "z_corrupted": base.z_corr, "z_rock": z_rock}
    states = {"Eu_true": base.payload["true"].expected_state(base.z_true),
              "Eu_corrupted": rock.saa.expected_state(base.z_corr),
              "Eu_rock": rock.saa.expected_state(z_rock, rock.weights(t2))}
    t_table = np.column_stack([np.arange(2), rock.saa.probs, t, deleted])
    return ExperimentResult(cfg, report, grid.nodes[:, None], controls, states, t_table)


def _adi_report_fields(res: ADIResult):
    reps = res.z_reports + res.t_reports
    it, ev = _sum_reports(reps)
    return it, ev, _ok(*reps) and res.converged


def _finish_ex2(cfg, base):
    grid = base.payload["grid"]
    corr = base.payload["corr"]
    problem = L1ReweightedSAA(corr, cfg.theta, cfg.stringent_bounds, gtol=cfg.bfgs_gtol)
    adi_cfg = ADIConfig(t_tol=cfg.t_tol, t_metric="l1", max_outer=cfg.max_outer,
                        z_solver="bfgs", t_solver="lp")
    res = run_adi(problem, np.ones(grid.n_nodes), adi_cfg)
    w = grid.weights
    e_rock = relative_l2_error(res.z, base.z_true, w)
    e_corr = relative_l2_error(base.z_corr, base.z_true, w)
    deleted = deleted_mask(corr.probs, res.t)
    mask = base.payload["samples"].corrupted_mask
    it, ev, ok = _adi_report_fields(res)
    report = MetricsReport(
        cfg.example, cfg.corruption, cfg.theta, cfg.seed, e_rock, e_corr,
        _safe_ratio(e_corr, e_rock), math.nan, float(np.max(np.abs(res.z - base.z_true))),
        int(deleted[mask].sum()), int(mask.sum()), int(deleted[~mask].sum()), int((~mask).sum()),
        res.outer_iterations, res.converged,
        base.rep_true.iterations, base.rep_true.objective_evals,
        base.rep_corr.iterations, base.rep_corr.objective_evals,
        it, ev, ok and _ok(base.rep_true, base.rep_corr))
    controls = {"z_true": base.z_true, "z_corrupted": base.z_corr, "z_rock": res.z}
    states = {"Eu_true": base.payload["true"].expected_state(base.z_true),
              "Eu_corrupted": corr.expected_state(base.z_corr),
              "Eu_rock": corr.expected_state(res.z, corr.probs + res.t)}
    t_table = np.column_stack([np.arange(cfg.n_samples), corr.probs, res.t, deleted])
    return ExperimentResult(cfg, report, grid.nodes[:, None], controls, states, t_table, res.trace)


def _finish_ex3(cfg, base):
    mesh = base.payload["mesh"]
    corr = base.payload["corr"]
    corr.theta = cfg.theta
    adi_cfg = ADIConfig(t_tol=cfg.t_tol, t_metric="L2_quadrature", max_outer=cfg.max_outer,
                        z_solver="lbfgs", t_solver="projected_gd")
    res = run_adi(corr, np.ones(mesh.n_dof), adi_cfg)
    M = corr.M
    e_rock = relative_l2_error(res.z, base.z_true, M)
    e_corr = relative_l2_error(base.z_corr, base.z_true, M)
    zero = np.zeros(corr.n_nodes)
    v_ratio = variance_ratio(corr.state_norms(base.z_corr, zero), corr.state_norms(res.z, res.t),
                             corr.weights)
    it, ev, ok = _adi_report_fields(res)
    report = MetricsReport(
        cfg.example, cfg.corruption, cfg.theta, cfg.seed, e_rock, e_corr,
        _safe_ratio(e_corr, e_rock), v_ratio, float(np.max(np.abs(res.z - base.z_true))),
        0, 0, 0, 0, res.outer_iterations, res.converged,
        base.rep_true.iterations, base.rep_true.objective_evals,
        base.rep_corr.iterations, base.rep_corr.objective_evals,
        it, ev, ok and _ok(base.rep_true, base.rep_corr))
    true = base.payload["true"]
    controls = {"z_true": base.z_true, "z_corrupted": base.z_corr, "z_rock": res.z}
    states = {"Eu_true": true.expected_state(base.z_true, np.zeros(1)),
              "Eu_corrupted": corr.expected_state(base.z_corr, zero),
              "Eu_rock": corr.expected_state(res.z, res.t)}
    t_table = np.column_stack([np.arange(corr.n_nodes), corr.nodes, res.t,
                               np.zeros(corr.n_nodes)])
    return ExperimentResult(cfg, report, mesh.vertices, controls, states, t_table, res.trace)


_FINISH = {"motivating": _finish_motivating, "ex1": _finish_ex1,
           "ex2": _finish_ex2, "ex3": _finish_ex3}


def run_example(cfg: ExperimentConfig, base: _Baseline | None = None) -> ExperimentResult:
    """Run the three solves for ``cfg`` and write CSVs when ``output_dir`` is set."""
    base = base or baseline(cfg)
    result = _FINISH[cfg.example](cfg, base)
    if cfg.output_dir:
        write_outputs(result, cfg.output_dir)
    return result


def theta_sweep(cfg: ExperimentConfig, thetas) -> list[MetricsReport]:
    """One relaxed solve per ``theta``; the true and corrupted solves are shared."""
    base = baseline(cfg)
    rows = [run_example(cfg.with_(theta=float(th), output_dir=None), base).report
            for th in thetas]
    if cfg.output_dir:
        write_reports(rows, os.path.join(cfg.output_dir, "sweep.csv"))
    return rows


@dataclass
class GammaRow:
    k: int
    eps: float
    theta: float
    distance: float


def gamma_schedule_study(example: str, schedule, base_cfg: ExperimentConfig | None = None) -> list[GammaRow]:
    """Distance ``||z_rock,k - z_true||_{L2}`` along a corruption/penalty schedule.

    The uncorrupted optimum does not depend on ``eps``, so it is computed once.
    """
    cfg0 = base_cfg.with_(example=example) if base_cfg else ExperimentConfig(example=example)
    rows = []
    z_true, metric = None, None
    for k, (eps, theta) in enumerate(schedule, start=1):
        cfg = cfg0.with_(corruption=float(eps), theta=float(theta), output_dir=None)
        base = baseline(cfg)
        res = run_example(cfg, base)
        if z_true is None:
            z_true = base.z_true
            metric = _l2_metric(cfg, base)
        d = res.controls["z_rock"] - z_true
        dist = math.sqrt(float(d @ (metric @ d)) if hasattr(metric, "shape") and len(metric.shape) == 2
                         else float(np.sum(metric * d * d)))
        rows.append(GammaRow(k, float(eps), float(theta), dist))
    if cfg0.output_dir:
        _write_rows(os.path.join(cfg0.output_dir, "gamma.csv"),
                    ["k", "eps", "theta", "distance"],
                    [[r.k, r.eps, r.theta, r.distance] for r in rows])
    return rows


def _l2_metric(cfg, base):
    if cfg.example in ("ex1", "ex2"):
        return base.payload["grid"].weights
    if cfg.example == "ex3":
        return base.payload["true"].M
    return np.ones(1)


def geometric_schedule(k_max: int, power: float = 0.5):
    """``eps_k = 2^-k`` and ``theta_k = eps_k^-power`` for ``k = 1..k_max``."""
    return [(2.0 ** -k, (2.0 ** -k) ** -power) for k in range(1, k_max + 1)]


# -- CSV output --

def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _write_rows(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


REPORT_COLUMNS = [f.name for f in fields(MetricsReport)]
TRACE_COLUMNS = ["outer_iter", "phase", "objective", "t_distance", "inner_iters", "inner_evals"]
T_COLUMNS = ["index", "p_or_xi", "t_star", "deleted_flag"]


def write_reports(reports, path):
    _write_rows(path, REPORT_COLUMNS, [[getattr(r, c) for c in REPORT_COLUMNS] for r in reports])


def write_outputs(result: ExperimentResult, out_dir: str):
    coords = result.coords
    axes = ["x", "y"][: coords.shape[1]]
    _write_rows(os.path.join(out_dir, "controls.csv"), axes + list(result.controls),
                np.column_stack([coords] + list(result.controls.values())).tolist())
    _write_rows(os.path.join(out_dir, "states.csv"), axes + list(result.states),
                np.column_stack([coords] + list(result.states.values())).tolist())
    tt = result.t_table
    _write_rows(os.path.join(out_dir, "t_vector.csv"), T_COLUMNS,
                [[int(r[0]), r[1], r[2], int(r[3])] for r in tt])
    write_reports([result.report], os.path.join(out_dir, "metrics.csv"))
    with open(os.path.join(out_dir, "adi_trace.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in result.trace:
            d = asdict(row)
            writer.writerow([d["outer_iter"], d["phase"], fmt(d["objective"]),
                             fmt(d["t_distance"]), d["inner_iters"], d["inner_evals"]])
