"""Finite differences for ``-(a u')' = z`` on (0, 1), ``u(0) = u(1) = 0``.

The three-point stencil uses the coefficient at cell midpoints::

    -[a_{j+1/2} (u_{j+1} - u_j) - a_{j-1/2} (u_j - u_{j-1})] / h^2 = z_j

The operator is symmetric, so the adjoint solve reuses the state matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .exceptions import CoercivityError
from .mesh import Grid1D


@dataclass
class TriDiagSystem:
    """Interior-node system; ``lower[i]`` couples rows i+1 and i."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def matvec(self, x):
        y = self.diag * x
        y[1:] += self.lower * x[:-1]
        y[:-1] += self.upper * x[1:]
        return y

    def dense(self):
        return (np.diag(self.diag) + np.diag(self.lower, -1)
                + np.diag(self.upper, 1))


@dataclass
class StateField1D:
    grid: Grid1D
    values: np.ndarray


def sample_coefficient(coef, grid: Grid1D) -> np.ndarray:
    """Coefficient values at cell midpoints from a callable, scalar or array."""
    if callable(coef):
        vals = coef(grid.midpoints)
    else:
        vals = coef
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (grid.n_cells,))
    return np.array(vals)


def _check_coercive(coef_mid):
    if not np.all(coef_mid > 0):
        raise CoercivityError(
            f"diffusion coefficient must be positive, min sample {np.min(coef_mid):g}")


def assemble_1d(coef_at_midpoints, source, grid: Grid1D) -> TriDiagSystem:
    a = np.asarray(coef_at_midpoints, dtype=float)
    if a.shape != (grid.n_cells,):
        raise ValueError(f"expected {grid.n_cells} midpoint values, got shape {a.shape}")
    _check_coercive(a)
    z = np.asarray(source, dtype=float)
    if z.shape != (grid.n_nodes,):
        raise ValueError(f"expected {grid.n_nodes} source values, got shape {z.shape}")
    h2 = grid.h ** 2
    diag = (a[:-1] + a[1:]) / h2
    off = -a[1:-1] / h2
    return TriDiagSystem(lower=off.copy(), diag=diag, upper=off.copy(), rhs=z[1:-1].copy())


def thomas_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Thomas algorithm for a single tridiagonal system (no pivoting)."""
    n = len(diag)
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0] if n > 1 else 0.0
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom
    x = d
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return x


class TridiagonalFactor:
    """Pre-factored batch of symmetric stencil matrices, one per coefficient row.

    ``coef_mid`` has shape ``(N, n_cells)``.  The elimination multipliers are
    computed once, so repeated solves against new right-hand sides only cost
    the forward and backward sweeps.  Arrays are stored node-major so each
    sweep step is a vector operation over the batch.
    """

    SMALL_BATCH = 16

    def __init__(self, coef_mid, grid: Grid1D):
        a = np.atleast_2d(np.asarray(coef_mid, dtype=float))
        if a.shape[1] != grid.n_cells:
            raise ValueError(f"expected {grid.n_cells} midpoint values per row")
        _check_coercive(a)
        self.grid = grid
        self.batch = a.shape[0]
        h2 = grid.h ** 2
        diag = ((a[:, :-1] + a[:, 1:]) / h2).T.copy()
        off = (-a[:, 1:-1] / h2).T.copy()
        n = diag.shape[0]
        piv = np.empty_like(diag)
        mult = np.empty_like(off)
        piv[0] = diag[0]
        for i in range(1, n):
            mult[i - 1] = off[i - 1] / piv[i - 1]
            piv[i] = diag[i] - mult[i - 1] * off[i - 1]
        self._off = off
        self._piv = piv
        self._mult = mult
        # Small batches: per-row banded Cholesky avoids the Python-level sweep.
        self._chol = None
        if self.batch <= self.SMALL_BATCH:
            self._chol = [
                cholesky_banded(np.vstack([np.concatenate([[0.0], off[:, k]]), diag[:, k]]))
                for k in range(self.batch)
            ]

    def solve(self, rhs, rows=None) -> np.ndarray:
        """Solve for interior values; ``rhs`` is ``(N, n_int)`` or ``(n_int,)``.

        ``rows`` restricts the solve to a subset of the batch.
        """
        if self._chol is not None:
            return self._solve_small(rhs, rows)
        off, piv, mult = self._off, self._piv, self._mult
        if rows is not None:
            off, piv, mult = off[:, rows], piv[:, rows], mult[:, rows]
        width = piv.shape[1]
        b = np.asarray(rhs, dtype=float)
        y = np.empty((piv.shape[0], width))
        y[:] = b.T if b.ndim == 2 else b[:, None]
        n = y.shape[0]
        for i in range(1, n):
            y[i] -= mult[i - 1] * y[i - 1]
        y[n - 1] /= piv[n - 1]
        for i in range(n - 2, -1, -1):
            y[i] = (y[i] - off[i] * y[i + 1]) / piv[i]
        return y.T

    def _solve_small(self, rhs, rows):
        b = np.asarray(rhs, dtype=float)
        rows = range(self.batch) if rows is None else np.arange(self.batch)[rows]
        if b.ndim == 1:
            return np.array([cho_solve_banded((self._chol[k], False), b) for k in rows])
        return np.array([cho_solve_banded((self._chol[k], False), bk) for k, bk in zip(rows, b)])

    def solve_nodal(self, rhs_nodal, rows=None) -> np.ndarray:
        """Like :meth:`solve` but takes/returns full nodal vectors (zero boundary)."""
        rhs = np.asarray(rhs_nodal, dtype=float)[..., 1:-1]
        inner = self.solve(rhs, rows=rows)
        out = np.zeros(inner.shape[:-1] + (self.grid.n_nodes,))
        out[..., 1:-1] = inner
        return out


def _solve(coef, rhs_nodal, grid):
    a = sample_coefficient(coef, grid)
    system = assemble_1d(a, rhs_nodal, grid)
    u = np.zeros(grid.n_nodes)
    u[1:-1] = thomas_solve(system.lower, system.diag, system.upper, system.rhs)
    return StateField1D(grid=grid, values=u)


def solve_state_1d(coef, z, grid: Grid1D) -> StateField1D:
    """State ``u = s(xi, z)`` for a coefficient callable/array ``a(x)``."""
    return _solve(coef, z, grid)


def solve_adjoint_1d(coef, residual, grid: Grid1D) -> StateField1D:
    """Adjoint solve with right-hand side ``u - u*`` (same matrix as the state)."""
    return _solve(coef, residual, grid)


def h1_seminorm(u, grid: Grid1D) -> float:
    du = np.diff(np.asarray(u, dtype=float), axis=-1) / grid.h
    return np.sqrt(np.sum(du ** 2, axis=-1) * grid.h)
