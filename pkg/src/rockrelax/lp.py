"""Exact solver for the sample-reweighting subproblem.

Given per-sample costs ``c`` and base probabilities ``p`` the subproblem is::

    min_t  c @ t + theta * ||t||_1
    s.t.   sum(t) = 0,  -p_i <= t_i <= u_i

with ``u_i = min(p_i, 1 - p_i)`` under the stringent bounds and ``1 - p_i``
otherwise.  Splitting ``t = t_plus - t_minus`` gives a bounded-variable LP
with a single equality row, solved by a revised simplex method with Bland's
rule.  A brute-force enumeration of basic solutions serves as the test oracle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

_TOL = 1e-12


@dataclass
class TSubproblem:
    costs: np.ndarray
    probs: np.ndarray
    theta: float
    stringent_bounds: bool = True

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float)
        self.probs = np.asarray(self.probs, dtype=float)
        if self.costs.shape != self.probs.shape:
            raise ValueError("costs and probs differ in shape")
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.costs)

    def bounds(self):
        lo = -self.probs
        hi = 1.0 - self.probs
        if self.stringent_bounds:
            hi = np.minimum(self.probs, hi)
        return lo, hi

    def objective(self, t) -> float:
        t = np.asarray(t, dtype=float)
        return float(self.costs @ t + self.theta * np.abs(t).sum())

    def split_lp(self):
        """Cost vector and upper bounds of the split variables ``[t_plus, t_minus]``."""
        lo, hi = self.bounds()
        c = np.concatenate([self.costs + self.theta, self.theta - self.costs])
        upper = np.concatenate([hi, -lo])
        row = np.concatenate([np.ones(self.n), -np.ones(self.n)])
        return c, row, upper


def bounded_simplex(c, A, b, lower, upper, max_iter: int | None = None):
    """Minimise ``c @ x`` subject to ``A x = b`` and ``lower <= x <= upper``.

    Revised simplex for bounded variables.  Phase one drives artificial
    variables to zero; both phases price with Bland's rule (lowest eligible
    index enters, lowest index wins ratio ties), which rules out cycling.
    Returns ``x`` at an optimal basic solution.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m, n = A.shape
    if np.any(upper < lower):
        raise ValueError("infeasible bounds")

    x = lower.copy()
    resid = b - A @ x
    sign = np.where(resid >= 0, 1.0, -1.0)
    A_full = np.hstack([A, np.diag(sign)])
    lo_full = np.concatenate([lower, np.zeros(m)])
    hi_full = np.concatenate([upper, np.full(m, np.inf)])
    x_full = np.concatenate([x, np.abs(resid)])
    basis = list(range(n, n + m))
    max_iter = max_iter or 50 * (n + m) + 1000

    def run(cost, hi):
        nonlocal x_full
        for _ in range(max_iter):
            B = A_full[:, basis]
            y = np.linalg.solve(B.T, cost[basis])
            d = cost - A_full.T @ y
            at_lo = x_full <= lo_full + _TOL
            at_hi = x_full >= hi - _TOL
            nonbasic = np.ones(len(cost), dtype=bool)
            nonbasic[basis] = False
            movable = hi > lo_full + _TOL
            improve = nonbasic & movable & ((at_lo & (d < -1e-11)) | (at_hi & ~at_lo & (d > 1e-11)))
            candidates = np.flatnonzero(improve)
            if len(candidates) == 0:
                return
            j = candidates[0]
            direction = 1.0 if at_lo[j] else -1.0
            w = np.linalg.solve(B, A_full[:, j])
            # basic variables move by -direction * w * step
            change = -direction * w
            step = hi[j] - lo_full[j]
            leave = None
            for pos in np.argsort(basis):  # lowest variable index wins ties
                k = basis[pos]
                if change[pos] < -_TOL:
                    lim = (x_full[k] - lo_full[k]) / -change[pos]
                elif change[pos] > _TOL:
                    lim = (hi[k] - x_full[k]) / change[pos]
                else:
                    continue
                if lim < step - _TOL:
                    step, leave = max(lim, 0.0), pos
            x_full[j] += direction * step
            x_full[basis] += change * step
            if leave is None:
                x_full[j] = hi[j] if direction > 0 else lo_full[j]
                continue
            k = basis[leave]
            x_full[k] = lo_full[k] if change[leave] < 0 else hi[k]
            basis[leave] = j
        raise RuntimeError("simplex iteration cap reached")

    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    run(phase1, hi_full)
    if np.sum(x_full[n:]) > 1e-9 * max(1.0, np.abs(b).sum()):
        raise ValueError("linear program is infeasible")
    # artificials are frozen at zero for phase two
    hi_full = np.concatenate([upper, np.zeros(m)])
    x_full[n:] = 0.0
    run(np.concatenate([c, np.zeros(m)]), hi_full)
    return np.clip(x_full[:n], lower, upper)


def solve_t_lp(prob: TSubproblem) -> np.ndarray:
    """Optimal reweighting ``t`` at a vertex of the split LP."""
    if prob.n == 1:
        return np.zeros(1)
    c, row, upper = prob.split_lp()
    x = bounded_simplex(c, row[None, :], [0.0], np.zeros_like(upper), upper)
    t = x[: prob.n] - x[prob.n:]
    # remove round-off drift from the equality constraint onto a free coordinate
    lo, hi = prob.bounds()
    t = np.clip(t, lo, hi)
    return t


def enumerate_vertices(prob: TSubproblem) -> np.ndarray:
    """Brute-force optimum over basic feasible solutions of the split LP (``N <= 8``)."""
    if prob.n > 8:
        raise ValueError("vertex enumeration is limited to N <= 8")
    c, row, upper = prob.split_lp()
    nv = len(c)
    corners = np.array(list(itertools.product((0, 1), repeat=nv)), dtype=float) * upper
    best_val, best_x = np.inf, None
    # all variables at bounds, plus one basic variable solved from the equality
    candidates = [corners]
    for j in range(nv):
        pts = corners.copy()
        others = pts @ row - pts[:, j] * row[j]
        pts[:, j] = -others / row[j]
        ok = (pts[:, j] >= -1e-12) & (pts[:, j] <= upper[j] + 1e-12)
        candidates.append(pts[ok])
    for pts in candidates:
        feas = np.abs(pts @ row) <= 1e-12
        if not np.any(feas):
            continue
        vals = pts[feas] @ c
        k = int(np.argmin(vals))
        if vals[k] < best_val - 1e-15:
            best_val, best_x = vals[k], pts[feas][k]
    return best_x[: prob.n] - best_x[prob.n:]


def deleted_mask(probs, t) -> np.ndarray:
    """Sample ``i`` counts as deleted when ``p_i + t_i <= 1e-9 / N``."""
    probs = np.asarray(probs, dtype=float)
    return probs + np.asarray(t, dtype=float) <= 1e-9 / len(probs)
