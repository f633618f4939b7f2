"""Tracking objectives, their Rockafellian relaxations, and adjoint gradients.

All objectives have the form::

    1/2 sum_i w_i ||s(xi_i, z) - u*||^2 + alpha/2 ||z||^2  (+ penalty on t)

where ``s`` is the PDE solution operator.  Gradients with respect to ``z``
are returned as Riesz representatives in the mesh L2 inner product: on the
grid this is the trapezoid-weighted product, on the disk the P1 mass matrix.
With that convention the gradient is ``alpha z + sum_i w_i p_i`` where
``p_i`` solves the adjoint problem with right-hand side ``u_i - u*``.

Indicator constraints on ``t`` are never replaced by penalties: evaluating
any relaxed objective at an infeasible ``t`` raises
:class:`~rockrelax.exceptions.InfeasibleError`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic_1d import TridiagonalFactor
from .elliptic_2d import FieldSolver2D, StiffnessAssembler, assemble_mass
from .exceptions import InfeasibleError
from .lp import TSubproblem, solve_t_lp
from .mesh import DiskMesh2D, Grid1D, gauss_legendre
from .optimizers import bfgs, lbfgs, projected_gd
from .random_field import DiscreteDistribution, eval_osc_radius

_FEAS_TOL = 1e-12


@dataclass
class RockafellianConfig:
    theta: float = 1.0
    q_norm: int = 2
    alpha: float = 1e-4
    target: np.ndarray | None = None

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.q_norm not in (1, 2):
            raise ValueError("q_norm must be 1 or 2")


def _key(*arrays):
    return b"".join(np.ascontiguousarray(a, dtype=float).tobytes() for a in arrays)


class SAAObjective1D:
    """Weighted tracking objective over a batch of 1-D coefficient samples.

    ``coef_mid`` holds each sample's coefficient at the cell midpoints, shape
    ``(N, n_cells)``.  States for the whole batch are cached for the last
    control evaluated, so a value call followed by a gradient call at the same
    ``z`` costs one batch of state solves.
    """

    def __init__(self, grid: Grid1D, coef_mid, probs, target=None, alpha: float = 1e-4):
        self.grid = grid
        self.coef_mid = np.atleast_2d(np.asarray(coef_mid, dtype=float))
        self.factor = TridiagonalFactor(self.coef_mid, grid)
        self.probs = np.asarray(probs, dtype=float)
        if self.probs.shape != (self.factor.batch,):
            raise ValueError("need one probability per coefficient sample")
        self.target = np.ones(grid.n_nodes) if target is None else np.asarray(target, dtype=float)
        self.alpha = alpha
        self._cache = (None, None)

    @property
    def n_samples(self) -> int:
        return self.factor.batch

    def states(self, z) -> np.ndarray:
        key = _key(z)
        if self._cache[0] != key:
            z = np.asarray(z, dtype=float)
            rhs = np.broadcast_to(z, (self.n_samples, self.grid.n_nodes))
            self._cache = (key, self.factor.solve_nodal(rhs))
        return self._cache[1]

    def misfits(self, z) -> np.ndarray:
        """``||s(xi_i, z) - u*||^2`` for every sample."""
        r = self.states(z) - self.target
        return self.grid.inner(r, r)

    def regularizer(self, z) -> float:
        return 0.5 * self.alpha * float(self.grid.inner(z, z))

    def value(self, z, weights=None) -> float:
        w = self.probs if weights is None else np.asarray(weights, dtype=float)
        return 0.5 * float(w @ self.misfits(z)) + self.regularizer(z)

    def gradient(self, z, weights=None) -> np.ndarray:
        w = self.probs if weights is None else np.asarray(weights, dtype=float)
        grad = self.alpha * np.array(z, dtype=float)
        rows = np.flatnonzero(w)
        if len(rows):
            resid = self.states(z)[rows] - self.target
            adj = self.factor.solve_nodal(resid, rows=rows)
            grad += w[rows] @ adj
        return grad

    def expected_state(self, z, weights=None) -> np.ndarray:
        w = self.probs if weights is None else np.asarray(weights, dtype=float)
        return w @ self.states(z)

    def solve(self, z0, weights=None, gtol: float = 1e-5, max_iter: int = 10_000):
        """BFGS minimisation in ``z`` at fixed sample weights."""
        return bfgs(lambda z: self.value(z, weights), lambda z: self.gradient(z, weights),
                    z0, gtol=gtol, max_iter=max_iter, metric=self.grid.weights)


def _coef_rows(atoms, grid):
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim == 1:
        return np.repeat(atoms[:, None], grid.n_cells, axis=1)
    return atoms


def objective_saa(z, dist: DiscreteDistribution, grid: Grid1D | None = None,
                  target=None, alpha: float = 1e-4) -> float:
    """SAA tracking objective; scalar atoms mean constant coefficients ``a = xi``."""
    grid = grid or Grid1D(len(z) - 1)
    return SAAObjective1D(grid, _coef_rows(dist.atoms, grid), dist.probs, target, alpha).value(z)


def grad_z_saa(z, dist: DiscreteDistribution, grid: Grid1D | None = None,
               target=None, alpha: float = 1e-4) -> np.ndarray:
    grid = grid or Grid1D(len(z) - 1)
    return SAAObjective1D(grid, _coef_rows(dist.atoms, grid), dist.probs, target, alpha).gradient(z)


def t_subproblem_costs(z, saa: SAAObjective1D) -> np.ndarray:
    """Linear costs ``1/2 ||s(xi_i, z) - u*||^2`` of the reweighting step."""
    return 0.5 * saa.misfits(z)


class TwoAtomRockafellian:
    """Relaxation of a two-atom law ``P[xi_1] = eps``, ``P[xi_2] = 1 - eps``.

    The equality ``t_1 + t_2 = 0`` is eliminated (``t_1 = -t_2``), leaving the
    scalar ``t2`` in ``[-p_2, 1 - p_2]``.  The penalty is
    ``theta / q * ||t||_q^q`` with ``||t||_q^q = 2 |t2|^q``.
    """

    def __init__(self, eps: float, cfg: RockafellianConfig, grid: Grid1D | None = None,
                 atoms=(0.2, 2.0)):
        self.grid = grid or Grid1D()
        self.eps = eps
        self.cfg = cfg
        target = cfg.target
        if target is None:
            target = np.sin(np.pi * self.grid.nodes)
        self.saa = SAAObjective1D(self.grid, _coef_rows(atoms, self.grid),
                                  np.array([eps, 1.0 - eps]), target, cfg.alpha)
        p2 = 1.0 - eps
        self.bounds = (-p2, 1.0 - p2)

    def weights(self, t2: float) -> np.ndarray:
        if not self.bounds[0] - _FEAS_TOL <= t2 <= self.bounds[1] + _FEAS_TOL:
            raise InfeasibleError(f"t2={t2} outside {self.bounds}")
        w = self.saa.probs + np.array([-t2, t2])
        return np.clip(w, 0.0, 1.0)

    def penalty(self, t2: float) -> float:
        q = self.cfg.q_norm
        return self.cfg.theta / q * 2.0 * abs(t2) ** q

    def value(self, z, t2: float) -> float:
        return self.saa.value(z, self.weights(t2)) + self.penalty(t2)

    def gradient(self, z, t2: float):
        w = self.weights(t2)
        gz = self.saa.gradient(z, w)
        c = self.saa.misfits(z)
        if self.cfg.q_norm == 2:
            dpen = 2.0 * self.cfg.theta * t2
        else:
            dpen = 2.0 * self.cfg.theta * np.sign(t2)
        return gz, 0.5 * (c[1] - c[0]) + dpen

    # packed form ``x = [z, t2]`` for the projected gradient solver
    def pack(self, z, t2):
        return np.append(np.asarray(z, dtype=float), t2)

    @property
    def metric(self) -> np.ndarray:
        return np.append(self.grid.weights, 1.0)

    def project(self, x):
        x = np.array(x, dtype=float)
        x[-1] = np.clip(x[-1], *self.bounds)
        return x

    def solve(self, z0, t0: float = 0.0, tol: float = 1e-4, max_iter: int = 100_000,
              criterion: str = "inner_product"):
        """Joint projected gradient descent over ``(z, t2)``."""
        def f(x):
            return self.value(x[:-1], x[-1])

        def g(x):
            gz, gt = self.gradient(x[:-1], x[-1])
            return np.append(gz, gt)

        if criterion == "inner_product":
            w = self.grid.weights

            def criterion(x, grad):
                # control part as in the unrelaxed solve, plus the projected t step
                t_step = x[-1] - np.clip(x[-1] - grad[-1], *self.bounds)
                return abs(float(np.sum(w * x[:-1] * grad[:-1]))) + abs(t_step)

        x, report = projected_gd(f, g, self.project, self.pack(z0, t0), tol=tol,
                                 max_iter=max_iter, metric=self.metric, criterion=criterion)
        return x[:-1], float(x[-1]), report


def rock_objective_ex1(z, t2: float, eps: float, cfg: RockafellianConfig,
                       grid: Grid1D | None = None) -> float:
    grid = grid or Grid1D(len(z) - 1)
    return TwoAtomRockafellian(eps, cfg, grid).value(z, t2)


def rock_grad_ex1(z, t2: float, eps: float, cfg: RockafellianConfig,
                  grid: Grid1D | None = None):
    grid = grid or Grid1D(len(z) - 1)
    return TwoAtomRockafellian(eps, cfg, grid).gradient(z, t2)


class L1ReweightedSAA:
    """Sample-reweighting relaxation with an l1 penalty.

    ``Phi(z, t) = 1/2 sum (p_i + t_i) c_i(z) + alpha/2 ||z||^2 + theta ||t||_1``
    subject to ``p + t`` on the simplex and ``-p_i <= t_i <= p_i`` when
    ``stringent_bounds`` is set.
    """

    def __init__(self, saa: SAAObjective1D, theta: float, stringent_bounds: bool = True,
                 gtol: float = 1e-5, max_iter: int = 10_000):
        if theta <= 0:
            raise ValueError("theta must be positive")
        self.saa = saa
        self.theta = theta
        self.stringent_bounds = stringent_bounds
        self.gtol = gtol
        self.max_iter = max_iter

    @property
    def probs(self):
        return self.saa.probs

    def t_bounds(self):
        return self.subproblem(np.zeros_like(self.probs)).bounds()

    def check(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.t_bounds()
        if (abs(t.sum()) > 1e-9 or np.any(t < lo - _FEAS_TOL) or np.any(t > hi + _FEAS_TOL)):
            raise InfeasibleError("perturbation violates the simplex or pointwise bounds")
        return np.clip(self.probs + t, 0.0, 1.0)

    def value(self, z, t) -> float:
        w = self.check(t)
        return self.saa.value(z, w) + self.theta * float(np.abs(t).sum())

    def gradient_z(self, z, t) -> np.ndarray:
        return self.saa.gradient(z, self.check(t))

    def costs(self, z) -> np.ndarray:
        return t_subproblem_costs(z, self.saa)

    def subproblem(self, costs) -> TSubproblem:
        return TSubproblem(costs, self.probs, self.theta, self.stringent_bounds)

    # ADI protocol
    def solve_z(self, z0, t):
        w = self.check(t)
        return self.saa.solve(z0, w, gtol=self.gtol, max_iter=self.max_iter)

    def solve_t(self, z, t0):
        t = solve_t_lp(self.subproblem(self.costs(z)))
        return t, None

    def objective(self, z, t) -> float:
        return self.value(z, t)

    def t_distance(self, a, b) -> float:
        return float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def rock_objective_ex2(z, t, saa: SAAObjective1D, cfg: RockafellianConfig,
                       stringent_bounds: bool = True) -> float:
    return L1ReweightedSAA(saa, cfg.theta, stringent_bounds).value(z, t)


class SupportShiftObjective2D:
    """Tracking objective on the disk over quadrature nodes of the random input.

    ``nodes`` are the sample values ``xi_j`` and ``weights`` their probability
    weights (summing to one).  The relaxation shifts each node to
    ``xi_j + t_j`` inside ``support`` and adds ``theta/2 sum_j w_j t_j^2``.
    The coefficient is ``1 / (xi + 3 sin(10 pi |x|))`` sampled at centroids.
    """

    def __init__(self, mesh: DiskMesh2D, nodes, weights, theta: float = 0.1,
                 alpha: float = 1e-5, target=None, support=None, method: str = "direct",
                 assembler: StiffnessAssembler | None = None, mass=None,
                 gtol: float = 1e-6, m: int = 7, max_iter: int = 10_000,
                 t_tol: float = 1e-6, t_max_iter: int = 1000):
        self.mesh = mesh
        self.nodes = np.asarray(nodes, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.theta = theta
        self.alpha = alpha
        self.target = np.ones(mesh.n_dof) if target is None else np.asarray(target, dtype=float)
        self.support = support
        self.method = method
        self.assembler = assembler or StiffnessAssembler(mesh)
        self.M = assemble_mass(mesh) if mass is None else mass
        self.radius = np.linalg.norm(mesh.centroids, axis=1)
        self.gtol, self.m, self.max_iter = gtol, m, max_iter
        self.t_tol, self.t_max_iter = t_tol, t_max_iter
        self._solver_cache = (None, None)
        self._state_cache = (None, None)

    @classmethod
    def uniform(cls, mesh, center: float, delta: float, n_quad: int = 8, **kw):
        """Gauss nodes for ``xi`` uniform on ``[center - delta, center + delta]``."""
        rule = gauss_legendre(n_quad, center - delta, center + delta)
        density = 1.0 / (2 * delta)
        kw.setdefault("support", (center - delta, center + delta))
        return cls(mesh, rule.nodes, rule.weights * density, **kw)

    @classmethod
    def deterministic(cls, mesh, xi: float, **kw):
        return cls(mesh, [xi], [1.0], **kw)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def t_bounds(self):
        if self.support is None:
            return np.full(self.n_nodes, -np.inf), np.full(self.n_nodes, np.inf)
        return self.support[0] - self.nodes, self.support[1] - self.nodes

    def check(self, t):
        t = np.asarray(t, dtype=float)
        if t.shape != (self.n_nodes,):
            raise ValueError(f"need {self.n_nodes} perturbation values")
        lo, hi = self.t_bounds()
        if np.any(t < lo - _FEAS_TOL) or np.any(t > hi + _FEAS_TOL):
            raise InfeasibleError("shifted nodes leave the support interval")
        return t

    def coefficients(self, t):
        shifted = self.nodes + self.check(t)
        return [eval_osc_radius(x, self.radius) for x in shifted]

    def _solvers(self, t):
        key = _key(t)
        if self._solver_cache[0] != key:
            solvers = [FieldSolver2D(self.mesh, a, self.assembler, self.M, self.method)
                       for a in self.coefficients(t)]
            self._solver_cache = (key, solvers)
        return self._solver_cache[1]

    def states(self, z, t):
        key = _key(z, t)
        if self._state_cache[0] != key:
            z = np.asarray(z, dtype=float)
            self._state_cache = (key, np.array([s.state(z) for s in self._solvers(t)]))
        return self._state_cache[1]

    def misfits(self, z, t) -> np.ndarray:
        r = self.states(z, t) - self.target
        return np.einsum("ji,ji->j", r, (self.M @ r.T).T)

    def state_norms(self, z, t) -> np.ndarray:
        u = self.states(z, t)
        return np.sqrt(np.einsum("ji,ji->j", u, (self.M @ u.T).T))

    def value(self, z, t) -> float:
        t = self.check(t)
        z = np.asarray(z, dtype=float)
        return (0.5 * float(self.weights @ self.misfits(z, t))
                + 0.5 * self.alpha * float(z @ (self.M @ z))
                + 0.5 * self.theta * float(self.weights @ t ** 2))

    def _adjoints(self, z, t):
        r = self.states(z, t) - self.target
        return np.array([s.adjoint(rj) for s, rj in zip(self._solvers(t), r)])

    def gradient_z(self, z, t) -> np.ndarray:
        """Riesz gradient in the mass-matrix inner product."""
        adj = self._adjoints(z, t)
        return self.alpha * np.asarray(z, dtype=float) + self.weights @ adj

    def gradient_t(self, z, t) -> np.ndarray:
        """Partial derivatives of the discrete objective in each node shift.

        ``w_j (theta t_j - int da/dxi grad u_j . grad p_j)`` with
        ``da/dxi = -a^2`` integrated by the centroid rule.
        """
        t = self.check(t)
        u = self.states(z, t)
        p = self._adjoints(z, t)
        tri = self.mesh.triangles
        area, grads = self.assembler.area, self.assembler.grads
        out = np.empty(self.n_nodes)
        for j, a in enumerate(self.coefficients(t)):
            gu = np.einsum("tv,tvd->td", u[j][tri], grads)
            gp = np.einsum("tv,tvd->td", p[j][tri], grads)
            coupling = np.sum(area * a ** 2 * np.einsum("td,td->t", gu, gp))
            out[j] = self.weights[j] * (self.theta * t[j] + coupling)
        return out

    def expected_state(self, z, t) -> np.ndarray:
        return self.weights @ self.states(z, t)

    def state_variance(self, z, t) -> float:
        """Variance of ``||u(., xi)||_{L2}`` under the node weights."""
        n = self.state_norms(z, t)
        mean = self.weights @ n
        return float(self.weights @ (n - mean) ** 2)

    # ADI protocol
    def solve_z(self, z0, t):
        t = self.check(t)
        return lbfgs(lambda z: self.value(z, t), lambda z: self.gradient_z(z, t), z0,
                     gtol=self.gtol, m=self.m, max_iter=self.max_iter, metric=self.M)

    def solve_t(self, z, t0):
        lo, hi = self.t_bounds()
        w = self.weights

        def grad(t):
            return self.gradient_t(z, t) / w

        t, report = projected_gd(lambda t: self.value(z, t), grad,
                                 lambda t: np.clip(t, lo, hi), t0, tol=self.t_tol,
                                 max_iter=self.t_max_iter, metric=w)
        return t, report

    def objective(self, z, t) -> float:
        return self.value(z, t)

    def t_distance(self, a, b) -> float:
        d = np.asarray(a) - np.asarray(b)
        return float(np.sqrt(self.weights @ d ** 2))


def rock_objective_ex3(z, t, problem: SupportShiftObjective2D) -> float:
    return problem.value(z, t)


def rock_grad_t_ex3(z, t, problem: SupportShiftObjective2D) -> np.ndarray:
    return problem.gradient_t(z, t)


def rock_grad_z_ex3(z, t, problem: SupportShiftObjective2D) -> np.ndarray:
    return problem.gradient_z(z, t)
