"""A scalar stochastic program whose minimiser jumps under a tiny corruption.

``g(x, xi) = (1 - x)/2 + xi x`` on ``x in [0, 1]``.  With ``xi = 0`` almost
surely the minimiser is ``x = 1``; giving mass ``eps`` to ``xi = 1/eps``
moves it to ``x = 0`` for every ``eps``.  The relaxed problem::

    Phi(x, t) = (1 - x)/2 + (eps + t2) x / eps + theta/2 ||t||^2,  t1 = -t2

restores ``x = 1`` by deleting the outlier atom (``t = (eps, -eps)``).

Because ``Phi`` is linear in ``x`` for fixed ``t``, the minimum sits at
``x = 0`` (value 1/2) or ``x = 1``.  At ``x = 1`` the optimal shift is
``t2 = max(-eps, -1/(2 theta eps))``, giving value ``theta eps^2`` when the
bound is active.  The relaxed minimiser is therefore ``(1, (eps, -eps))``
exactly when ``theta < 1 / (2 eps^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleError
from .optimizers import projected_gd


@dataclass(frozen=True)
class MotivatingInstance:
    eps: float
    theta: float

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.theta <= 0:
            raise ValueError("theta must be positive")

    @property
    def t2_bounds(self) -> tuple[float, float]:
        # p2 = eps is the outlier's mass
        return -self.eps, 1.0 - self.eps

    @property
    def deletion_threshold(self) -> float:
        """Largest ``theta`` (exclusive) for which deleting the outlier is optimal."""
        return 1.0 / (2.0 * self.eps ** 2)

    @property
    def stated_threshold(self) -> float:
        """The commonly quoted bound ``(eps/2)^-2``; exceeds the true threshold by 8x."""
        return (self.eps / 2.0) ** -2


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("x must lie in [0, 1]")
    return x


def phi_uncorrupted(x):
    return (1.0 - _check_x(x)) / 2.0


def _phi(x, eps, t2):
    # mass eps + t2 on the atom xi = 1/eps, the rest on xi = 0
    return 0.5 * (1.0 - x) + (eps + t2) * x / eps


def phi_corrupted(x, eps: float):
    """Equals ``(1 + x)/2`` for every ``eps`` in (0, 1)."""
    return _phi(_check_x(x), eps, 0.0)


def phi_relaxed(inst: MotivatingInstance, x, t2):
    x = _check_x(x)
    t2 = np.asarray(t2, dtype=float)
    lo, hi = inst.t2_bounds
    if np.any(t2 < lo - 1e-12) or np.any(t2 > hi + 1e-12):
        raise InfeasibleError(f"t2 outside [{lo}, {hi}]")
    return _phi(x, inst.eps, t2) + inst.theta * t2 ** 2


def _grad(inst, v):
    x, t2 = v
    return np.array([-0.5 + (inst.eps + t2) / inst.eps, x / inst.eps + 2.0 * inst.theta * t2])


def _project(inst, v):
    lo, hi = inst.t2_bounds
    return np.array([np.clip(v[0], 0.0, 1.0), np.clip(v[1], lo, hi)])


def exact_minimizer(inst: MotivatingInstance):
    """Global minimiser ``(x, (t1, t2))`` from the endpoint analysis."""
    if inst.theta < inst.deletion_threshold:
        return 1.0, np.array([inst.eps, -inst.eps])
    return 0.0, np.zeros(2)


def solve_rockafellian_closed_form(inst: MotivatingInstance):
    """Closed-form minimiser; the quoted validity range is ``theta < (eps/2)^-2``.

    Inside that range the exact minimiser is returned.  Between the true
    threshold ``1/(2 eps^2)`` and the quoted one this is ``(0, (0, 0))``, not
    ``(1, (eps, -eps))``.
    """
    if inst.theta >= inst.stated_threshold:
        raise ValueError(f"theta={inst.theta} outside the closed-form range "
                         f"theta < {inst.stated_threshold:g}")
    return exact_minimizer(inst)


def grid_search(inst: MotivatingInstance, resolution: float = 1e-3):
    """Brute-force minimum over a tensor grid of ``x`` and ``t2``."""
    lo, hi = inst.t2_bounds
    xs = np.linspace(0.0, 1.0, int(round(1.0 / resolution)) + 1)
    ts = np.linspace(lo, hi, int(round((hi - lo) / resolution)) + 1)
    vals = phi_relaxed(inst, xs[:, None], ts[None, :])
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    return float(xs[i]), np.array([-ts[j], ts[j]])


def solve_rockafellian_numeric(inst: MotivatingInstance, grid_n: int = 5, tol: float = 1e-8,
                               max_iter: int = 2000):
    """Projected gradient descent started from every point of a coarse grid.

    ``Phi`` is bilinear, hence nonconvex, so single starts can end at the
    wrong corner.  The best local solution is returned; every iterate stays
    in the feasible box.
    """
    lo, hi = inst.t2_bounds
    best = None
    for x0 in np.linspace(0.0, 1.0, grid_n):
        for t0 in np.linspace(lo, hi, grid_n):
            v, rep = projected_gd(lambda v: phi_relaxed(inst, v[0], v[1]),
                                  lambda v: _grad(inst, v),
                                  lambda v: _project(inst, v),
                                  np.array([x0, t0]), tol=tol, max_iter=max_iter)
            if best is None or rep.final_value < best[1] - 1e-15:
                best = (v, rep.final_value)
    x, t2 = best[0]
    return float(x), np.array([-t2, t2])
