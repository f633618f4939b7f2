"""Spatial meshes and quadrature rules.

Two meshes are supported: a uniform grid on the unit interval (finite
differences) and a concentric-ring triangulation of the unit disk (P1 finite
elements).  Both are immutable once built.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_j = j h`` on ``[0, 1]`` with ``n_cells`` cells."""

    n_cells: int = 256

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n_nodes) * self.h
        x[-1] = 1.0
        return x

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights, so ``weights @ f`` integrates ``f``."""
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def inner(self, u, v) -> float:
        """Trapezoid-rule L2 inner product of nodal fields (last axis)."""
        return np.sum(self.weights * np.asarray(u) * np.asarray(v), axis=-1)

    def norm(self, u) -> float:
        return np.sqrt(self.inner(u, u))


def trapezoid_integrate(f_values, grid: Grid1D) -> float:
    f = np.asarray(f_values, dtype=float)
    if f.shape[-1] != grid.n_nodes:
        raise ValueError(
            f"expected {grid.n_nodes} nodal values, got {f.shape[-1]}")
    return 0.5 * grid.h * np.sum(f[..., 1:] + f[..., :-1], axis=-1)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """n-point Gauss-Legendre rule mapped affinely onto ``[a, b]``."""
    if int(n) != n or n < 1:
        raise ValueError(f"need at least one node, got n={n!r}")
    if not a < b:
        raise ValueError(f"empty interval [{a}, {b}]")
    x, w = np.polynomial.legendre.leggauss(int(n))
    half = 0.5 * (b - a)
    return QuadratureRule(nodes=_frozen(0.5 * (a + b) + half * x),
                          weights=_frozen(half * w),
                          interval=(float(a), float(b)))


@dataclass(frozen=True, eq=False)
class DiskMesh2D:
    """Triangulation of the unit disk.

    ``boundary`` flags the vertices on the unit circle; all of them carry
    homogeneous Dirichlet data in the solvers.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    n_rings: int = 0
    _free: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(self.vertices))
        object.__setattr__(self, "triangles", _frozen(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary", _frozen(self.boundary, dtype=bool))
        object.__setattr__(self, "_free", _frozen(np.flatnonzero(~self.boundary), dtype=np.int64))

    @property
    def n_dof(self) -> int:
        return len(self.vertices)

    @property
    def free(self) -> np.ndarray:
        return self._free

    @property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def area(self) -> float:
        return float(self.signed_areas.sum())


def rings_for_target(target_dof: int) -> int:
    """Ring count whose vertex total ``1 + 3K(K+1)`` is closest to the target."""
    k = max(1, int(round((-3 + np.sqrt(9 + 12 * (target_dof - 1))) / 6)))
    candidates = [c for c in (k - 1, k, k + 1) if c >= 1]
    return min(candidates, key=lambda c: abs(1 + 3 * c * (c + 1) - target_dof))


def _stitch(inner: np.ndarray, outer: np.ndarray) -> list[tuple[int, int, int]]:
    # Zip two closed rings ordered by angle, both starting at angle 0.
    n_in, n_out = len(inner), len(outer)
    if n_in == 1:
        return [(inner[0], outer[j], outer[(j + 1) % n_out]) for j in range(n_out)]
    tris = []
    i = j = 0
    while i < n_in or j < n_out:
        next_in = (i + 1) / n_in
        next_out = (j + 1) / n_out
        if j < n_out and (i == n_in or next_out <= next_in):
            tris.append((inner[i % n_in], outer[j], outer[(j + 1) % n_out]))
            j += 1
        else:
            tris.append((inner[i], outer[j % n_out], inner[(i + 1) % n_in]))
            i += 1
    return tris


def build_disk_mesh(target_dof: int = 5185, n_rings: int | None = None) -> DiskMesh2D:
    """Concentric-ring triangulation of the unit disk.

    Ring ``k`` (radius ``k/K``) holds ``6k`` equally spaced vertices; adjacent
    rings are stitched by angle, giving ``6K^2`` triangles.  Pass ``n_rings``
    to bypass the DOF target.
    """
    if n_rings is None:
        if target_dof < 7:
            raise ValueError(f"target_dof must be at least 7, got {target_dof}")
        n_rings = rings_for_target(target_dof)
    K = int(n_rings)
    if K < 1:
        raise ValueError("need at least one ring")

    verts = [(0.0, 0.0)]
    rings = [np.array([0])]
    for k in range(1, K + 1):
        n = 6 * k
        ang = 2 * np.pi * np.arange(n) / n
        r = k / K
        start = len(verts)
        verts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
        rings.append(np.arange(start, start + n))
    verts = np.array(verts)
    # put the outer ring exactly on the circle
    outer = rings[-1]
    verts[outer] /= np.linalg.norm(verts[outer], axis=1)[:, None]

    tris = []
    for k in range(1, K + 1):
        tris.extend(_stitch(rings[k - 1], rings[k]))
    tris = np.array(tris, dtype=np.int64)

    p = verts[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    flip = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    boundary = np.zeros(len(verts), dtype=bool)
    boundary[outer] = True
    return DiskMesh2D(verts, tris, boundary, n_rings=K)
