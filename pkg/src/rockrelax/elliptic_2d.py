"""P1 finite elements for ``-div(a grad u) = z`` on the unit disk.

Homogeneous Dirichlet data are imposed by eliminating boundary vertices;
matrices returned with ``eliminate_boundary=True`` act on the free vertices
only.  The coefficient is sampled once per triangle at its centroid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import CoercivityError, ConvergenceError
from .mesh import DiskMesh2D


@dataclass
class StateField2D:
    mesh: DiskMesh2D
    values: np.ndarray


def p1_gradients(mesh: DiskMesh2D):
    """Per-triangle areas and constant basis gradients, shape ``(T, 3, 2)``."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = mesh.signed_areas
    # grad phi_i = (y_j - y_k, x_k - x_j) / (2 area), (i, j, k) cyclic
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([gx, gy], axis=-1) / (2 * area)[:, None, None]
    return area, grads


def _coef_per_triangle(mesh, coef):
    if callable(coef):
        c = mesh.centroids
        vals = coef(c[:, 0], c[:, 1])
    else:
        vals = coef
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (len(mesh.triangles),))
    if not np.all(vals > 0):
        raise CoercivityError(
            f"diffusion coefficient must be positive, min sample {np.min(vals):g}")
    return np.array(vals)


class StiffnessAssembler:
    """Reusable assembly of stiffness matrices for changing coefficients.

    The sparsity pattern and the unit-coefficient element matrices are built
    once; :meth:`assemble` then only scales and scatters element values in
    fixed triangle order.
    """

    def __init__(self, mesh: DiskMesh2D, eliminate_boundary: bool = True):
        self.mesh = mesh
        self.area, self.grads = p1_gradients(mesh)
        self.unit = self.area[:, None, None] * np.einsum("tid,tjd->tij", self.grads, self.grads)
        tri = mesh.triangles
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        n = mesh.n_dof
        if eliminate_boundary:
            free = mesh.free
            index = -np.ones(n, dtype=np.int64)
            index[free] = np.arange(len(free))
            rows, cols = index[rows], index[cols]
            keep = (rows >= 0) & (cols >= 0)
            n = len(free)
        else:
            keep = np.ones(len(rows), dtype=bool)
        self._keep = keep
        # Map every kept element entry to a slot in the CSR data array.
        key = rows[keep] * n + cols[keep]
        uniq, slot = np.unique(key, return_inverse=True)
        self._slot = slot
        self._n = n
        pattern = sp.csr_matrix(
            (np.arange(1, len(uniq) + 1, dtype=float), (uniq // n, uniq % n)), shape=(n, n))
        self._indptr = pattern.indptr
        self._indices = pattern.indices
        self._perm = pattern.data.astype(np.int64) - 1

    def assemble(self, coef_tri) -> sp.csr_matrix:
        vals = (np.asarray(coef_tri, dtype=float)[:, None, None] * self.unit).ravel()[self._keep]
        data = np.bincount(self._slot, weights=vals, minlength=len(self._perm))
        return sp.csr_matrix((data[self._perm], self._indices, self._indptr),
                             shape=(self._n, self._n))


def assemble_stiffness(mesh: DiskMesh2D, coef, eliminate_boundary: bool = True) -> sp.csr_matrix:
    """P1 stiffness matrix; ``coef`` is ``a(x, y)`` or per-triangle values."""
    a = _coef_per_triangle(mesh, coef)
    return StiffnessAssembler(mesh, eliminate_boundary).assemble(a)


def assemble_mass(mesh: DiskMesh2D, eliminate_boundary: bool = False) -> sp.csr_matrix:
    """Consistent P1 mass matrix, ``(area / 12) [[2,1,1],[1,2,1],[1,1,2]]`` per element."""
    area = mesh.signed_areas
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    vals = (area[:, None, None] * local).ravel()
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_dof
    M = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    if eliminate_boundary:
        free = mesh.free
        M = M[free][:, free]
    return M.tocsr()


def solve_cg(A, rhs, tol: float = 1e-10, x0=None, max_iter: int | None = None,
             return_iterations: bool = False):
    """Jacobi-preconditioned conjugate gradients.

    Stops once ``||A x - b|| <= tol ||b||``; raises :class:`ConvergenceError`
    after ``max_iter`` (default ``10 * dim``) iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(rhs, dtype=float)
    n = len(b)
    max_iter = 10 * n if max_iter is None else max_iter
    inv_diag = 1.0 / np.asarray(A.diagonal(), dtype=float)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x[:] = 0.0
        return (x, 0) if return_iterations else x
    r = b - A @ x
    if np.linalg.norm(r) <= tol * bnorm:
        return (x, 0) if return_iterations else x
    zv = inv_diag * r
    d = zv.copy()
    rz = r @ zv
    for it in range(1, max_iter + 1):
        Ad = A @ d
        step = rz / (d @ Ad)
        x += step * d
        r -= step * Ad
        if np.linalg.norm(r) <= tol * bnorm:
            return (x, it) if return_iterations else x
        zv = inv_diag * r
        rz_new = r @ zv
        d = zv + (rz_new / rz) * d
        rz = rz_new
    raise ConvergenceError(f"CG did not reach tol={tol:g} in {max_iter} iterations")


class FieldSolver2D:
    """Factor-once solver for one coefficient sample on a disk mesh.

    ``method="direct"`` uses a sparse LU factorisation (reused by the state
    and adjoint solves); ``method="cg"`` calls :func:`solve_cg`.
    """

    def __init__(self, mesh, coef_tri, assembler=None, mass=None, method="direct",
                 cg_tol=1e-10):
        self.mesh = mesh
        self.assembler = assembler or StiffnessAssembler(mesh)
        self.coef = np.asarray(coef_tri, dtype=float)
        self.K = self.assembler.assemble(self.coef)
        self.M = assemble_mass(mesh) if mass is None else mass
        self._M_free_rows = self.M[mesh.free]
        self.method = method
        self.cg_tol = cg_tol
        self._lu = spla.splu(self.K.tocsc()) if method == "direct" else None

    def _solve_free(self, rhs):
        if self._lu is not None:
            return self._lu.solve(rhs)
        return solve_cg(self.K, rhs, tol=self.cg_tol)

    def state(self, z):
        u = np.zeros(self.mesh.n_dof)
        u[self.mesh.free] = self._solve_free(self._M_free_rows @ z)
        return u

    def adjoint(self, residual):
        """Adjoint with right-hand side ``M (u - u*)`` restricted to free rows."""
        p = np.zeros(self.mesh.n_dof)
        p[self.mesh.free] = self._solve_free(self._M_free_rows @ residual)
        return p


def solve_state_2d(mesh: DiskMesh2D, coef, z, method: str = "cg", tol: float = 1e-10) -> StateField2D:
    a = _coef_per_triangle(mesh, coef)
    solver = FieldSolver2D(mesh, a, method=method, cg_tol=tol)
    return StateField2D(mesh=mesh, values=solver.state(np.asarray(z, dtype=float)))


def solve_adjoint_2d(mesh: DiskMesh2D, coef, residual, method: str = "cg", tol: float = 1e-10) -> StateField2D:
    a = _coef_per_triangle(mesh, coef)
    solver = FieldSolver2D(mesh, a, method=method, cg_tol=tol)
    return StateField2D(mesh=mesh, values=solver.adjoint(np.asarray(residual, dtype=float)))


def mass_norm(M, u) -> float:
    return float(np.sqrt(u @ (M @ u)))
