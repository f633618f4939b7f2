"""First-order and quasi-Newton optimizers with evaluation counters.

Every optimizer accepts a ``metric`` describing the inner product of the
unknown's space: ``None`` (Euclidean), a 1-D array of diagonal weights (e.g.
trapezoid weights of a grid) or a matrix (e.g. a finite-element mass matrix).
The ``grad`` callback must return the gradient with respect to that inner
product (the Riesz representative), so that norms and curvature pairs are
mesh-independent.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Termination(str, Enum):
    TOLERANCE = "tolerance"
    MAX_ITER = "max_iter"
    LINE_SEARCH_FAILURE = "line_search_failure"


@dataclass
class LineSearchConfig:
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    wolfe_c2: float = 0.9
    max_backtracks: int = 50

    def __post_init__(self):
        if not 0 < self.armijo_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < armijo_c1 < wolfe_c2 < 1")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class OptimizerReport:
    iterations: int = 0
    objective_evals: int = 0
    gradient_evals: int = 0
    final_value: float = float("nan")
    termination_reason: Termination = Termination.MAX_ITER
    final_criterion: float = float("nan")


class Metric:
    """Inner product ``<a, b> = a^T W b`` for diagonal or matrix ``W``."""

    def __init__(self, metric=None):
        self.W = metric
        if metric is None:
            self.kind = "euclid"
        elif hasattr(metric, "shape") and len(metric.shape) == 2:
            self.kind = "matrix"
        else:
            self.W = np.asarray(metric, dtype=float)
            self.kind = "diag"

    def apply(self, v):
        if self.kind == "euclid":
            return v
        if self.kind == "diag":
            return self.W * v
        return self.W @ v

    def inner(self, a, b) -> float:
        return float(np.dot(a, self.apply(b)))

    def norm(self, a) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))


class _Counter:
    def __init__(self, f, grad, report):
        self._f, self._grad, self.report = f, grad, report

    def f(self, x):
        self.report.objective_evals += 1
        return float(self._f(x))

    def grad(self, x):
        self.report.gradient_evals += 1
        return np.asarray(self._grad(x), dtype=float)


def _identity(x):
    return x


def _descent(f, grad, project, x0, tol, ls, max_iter, metric, criterion, step0):
    ls = ls or LineSearchConfig()
    ip = Metric(metric)
    report = OptimizerReport()
    ev = _Counter(f, grad, report)
    x = project(np.array(x0, dtype=float))
    fx = ev.f(x)
    step = step0
    while True:
        g = ev.grad(x)
        if callable(criterion):
            crit = float(criterion(x, g))
        elif criterion == "inner_product":
            crit = abs(ip.inner(x, g))
        else:
            crit = ip.norm(x - project(x - g))
        report.final_criterion = crit
        if crit < tol or not np.any(g):
            report.termination_reason = Termination.TOLERANCE
            break
        if report.iterations >= max_iter:
            report.termination_reason = Termination.MAX_ITER
            break
        alpha = step
        for _ in range(ls.max_backtracks):
            x_new = project(x - alpha * g)
            f_new = ev.f(x_new)
            # strict decrease guards against accepting pure round-off
            if (np.isfinite(f_new) and f_new < fx
                    and f_new <= fx + ls.armijo_c1 * ip.inner(g, x_new - x)):
                break
            alpha *= ls.backtrack_factor
        else:
            report.termination_reason = Termination.LINE_SEARCH_FAILURE
            break
        x, fx = x_new, f_new
        report.iterations += 1
        # next trial step starts one expansion above the accepted one
        step = alpha / ls.backtrack_factor
    report.final_value = fx
    return x, report


def armijo_gd(f, grad, x0, tol: float = 1e-4, ls: LineSearchConfig | None = None,
              max_iter: int = 100_000, metric=None, criterion: str = "inner_product",
              step0: float = 1.0):
    """Gradient descent with Armijo backtracking.

    With the default ``criterion="inner_product"`` the run stops once
    ``|<x, grad f(x)>| < tol``.  ``criterion="gradient_norm"`` uses
    ``||grad f(x)|| < tol`` instead.  Each iteration's first trial step is the
    previously accepted step divided by the backtracking factor.  A callable
    ``criterion(x, g)`` may supply any other stopping quantity.
    """
    return _descent(f, grad, _identity, x0, tol, ls, max_iter, metric, criterion, step0)


def projected_gd(f, grad, project, x0, tol: float = 1e-6, ls: LineSearchConfig | None = None,
                 max_iter: int = 100_000, metric=None, criterion: str = "projected_step",
                 step0: float = 1.0):
    """Projected gradient descent with Armijo backtracking along the projection arc.

    Every trial point is ``project(x - alpha g)``, so iterates stay feasible.
    The default stopping rule is ``||x - project(x - g)|| < tol``.
    """
    if criterion == "gradient_norm":
        criterion = "projected_step"
    return _descent(f, grad, project, x0, tol, ls, max_iter, metric, criterion, step0)


def _wolfe_search(ev, ip, x, fx, g, d, alpha, ls):
    """Weak-Wolfe bracketing search; returns ``(x, f, g, ok)``."""
    dg0 = ip.inner(g, d)
    lo, hi = 0.0, np.inf
    best = None
    for _ in range(ls.max_backtracks):
        x_new = x + alpha * d
        f_new = ev.f(x_new)
        if (not np.isfinite(f_new) or f_new >= fx
                or f_new > fx + ls.armijo_c1 * alpha * dg0):
            hi = alpha
        else:
            g_new = ev.grad(x_new)
            best = (x_new, f_new, g_new)
            if ip.inner(g_new, d) >= ls.wolfe_c2 * dg0:
                return x_new, f_new, g_new, True
            lo = alpha
        alpha = 0.5 * (lo + hi) if np.isfinite(hi) else 2.0 * lo
    if best is not None:
        # sufficient decrease holds; the curvature-pair test decides the update
        return (*best, True)
    return x, fx, g, False


def bfgs(f, grad, x0, gtol: float = 1e-5, max_iter: int = 10_000, metric=None,
         ls: LineSearchConfig | None = None):
    """Dense BFGS on the inverse Hessian with a weak-Wolfe line search.

    The update is skipped when the curvature condition ``<s, y> > 0`` fails.
    The initial inverse Hessian is rescaled by ``<s, y> / <y, y>`` at the first
    update.  A non-descent direction resets it to the identity.
    """
    ls = ls or LineSearchConfig()
    ip = Metric(metric)
    report = OptimizerReport()
    ev = _Counter(f, grad, report)
    x = np.array(x0, dtype=float)
    n = x.size
    fx = ev.f(x)
    g = ev.grad(x)
    H = None
    while True:
        gnorm = ip.norm(g)
        report.final_criterion = gnorm
        if gnorm < gtol:
            report.termination_reason = Termination.TOLERANCE
            break
        if report.iterations >= max_iter:
            report.termination_reason = Termination.MAX_ITER
            break
        d = -g if H is None else -(H @ g)
        if H is not None and ip.inner(d, g) >= 0:
            H = None
            d = -g
        alpha = min(1.0, 1.0 / gnorm) if H is None else 1.0
        x_new, f_new, g_new, ok = _wolfe_search(ev, ip, x, fx, g, d, alpha, ls)
        if not ok:
            report.termination_reason = Termination.LINE_SEARCH_FAILURE
            break
        s = x_new - x
        y = g_new - g
        ws, wy = ip.apply(s), ip.apply(y)
        sy = float(s @ wy)
        if sy > 1e-12 * np.sqrt(float(s @ ws) * float(y @ wy)):
            if H is None:
                H = (sy / float(y @ wy)) * np.eye(n)
            rho = 1.0 / sy
            Hy = H @ y
            HTwy = H.T @ wy
            yHy = float(wy @ Hy)
            H = (H - rho * np.outer(Hy, ws) - rho * np.outer(s, HTwy)
                 + (rho * rho * yHy + rho) * np.outer(s, ws))
        x, fx, g = x_new, f_new, g_new
        report.iterations += 1
    report.final_value = fx
    return x, report


def lbfgs(f, grad, x0, gtol: float = 1e-5, m: int = 7, ls: LineSearchConfig | None = None,
          max_iter: int = 10_000, metric=None):
    """Limited-memory BFGS (two-loop recursion, history ``m``) with a Wolfe search."""
    ls = ls or LineSearchConfig()
    ip = Metric(metric)
    report = OptimizerReport()
    ev = _Counter(f, grad, report)
    x = np.array(x0, dtype=float)
    fx = ev.f(x)
    g = ev.grad(x)
    pairs: list[tuple[np.ndarray, np.ndarray, float]] = []
    while True:
        gnorm = ip.norm(g)
        report.final_criterion = gnorm
        if gnorm < gtol:
            report.termination_reason = Termination.TOLERANCE
            break
        if report.iterations >= max_iter:
            report.termination_reason = Termination.MAX_ITER
            break
        q = g.copy()
        coeffs = []
        for s, y, rho in reversed(pairs):
            a = rho * ip.inner(s, q)
            coeffs.append(a)
            q -= a * y
        if pairs:
            s, y, rho = pairs[-1]
            q *= 1.0 / (rho * ip.inner(y, y))
        for (s, y, rho), a in zip(pairs, reversed(coeffs)):
            b = rho * ip.inner(y, q)
            q += (a - b) * s
        d = -q
        if ip.inner(d, g) >= 0:
            pairs.clear()
            d = -g
        alpha = 1.0 if pairs else min(1.0, 1.0 / gnorm)
        x_new, f_new, g_new, ok = _wolfe_search(ev, ip, x, fx, g, d, alpha, ls)
        if not ok:
            report.termination_reason = Termination.LINE_SEARCH_FAILURE
            break
        s = x_new - x
        y = g_new - g
        sy = ip.inner(s, y)
        if sy > 1e-12 * ip.norm(s) * ip.norm(y):
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > m:
                pairs.pop(0)
        x, fx, g = x_new, f_new, g_new
        report.iterations += 1
    report.final_value = fx
    return x, report
