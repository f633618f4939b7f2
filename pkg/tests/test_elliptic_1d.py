import numpy as np
import pytest

from rockrelax.elliptic_1d import (TridiagonalFactor, assemble_1d, h1_seminorm, sample_coefficient,
                                   solve_adjoint_1d, solve_state_1d, thomas_solve)
from rockrelax.exceptions import CoercivityError
from rockrelax.mesh import Grid1D


def manufactured_error(n):
    g = Grid1D(n)
    z = 2 * np.pi ** 2 * np.sin(np.pi * g.nodes)
    u = solve_state_1d(lambda x: 2.0 + 0 * x, z, g).values
    return np.max(np.abs(u - np.sin(np.pi * g.nodes)))


class TestAssembly:
    def test_single_interior_node(self):
        g = Grid1D(2)
        sys = assemble_1d(np.ones(2), [0.0, 3.0, 0.0], g)
        assert np.allclose(sys.diag, [8.0])
        assert np.allclose(sys.rhs, [3.0])

    def test_linear_in_coefficient(self, coarse_grid, rng):
        z = rng.standard_normal(coarse_grid.n_nodes)
        one = assemble_1d(np.ones(32), z, coarse_grid)
        two = assemble_1d(2 * np.ones(32), z, coarse_grid)
        assert np.array_equal(two.dense(), 2 * one.dense())

    def test_zero_source(self, coarse_grid):
        sys = assemble_1d(np.ones(32), np.zeros(33), coarse_grid)
        assert not np.any(sys.rhs)

    def test_symmetric_positive_definite(self, coarse_grid, rng):
        a = np.exp(rng.standard_normal(32))
        A = assemble_1d(a, np.zeros(33), coarse_grid).dense()
        assert np.allclose(A, A.T)
        assert np.linalg.eigvalsh(A).min() > 0

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_rejects_non_positive_coefficient(self, coarse_grid, bad):
        a = np.ones(32)
        a[5] = bad
        with pytest.raises(CoercivityError):
            assemble_1d(a, np.zeros(33), coarse_grid)

    def test_shape_checks(self, coarse_grid):
        with pytest.raises(ValueError):
            assemble_1d(np.ones(31), np.zeros(33), coarse_grid)
        with pytest.raises(ValueError):
            assemble_1d(np.ones(32), np.zeros(32), coarse_grid)

    def test_midpoint_sampling(self):
        g = Grid1D(4)
        assert np.allclose(sample_coefficient(lambda x: x, g), g.midpoints)
        assert np.allclose(sample_coefficient(3.0, g), 3.0)


class TestSolvers:
    def test_thomas_matches_dense(self, rng):
        n = 20
        d = 4 + rng.random(n)
        lo = rng.random(n - 1)
        up = rng.random(n - 1)
        b = rng.standard_normal(n)
        A = np.diag(d) + np.diag(lo, -1) + np.diag(up, 1)
        assert np.allclose(thomas_solve(lo, d, up, b), np.linalg.solve(A, b), atol=1e-13)

    def test_manufactured_solution(self, grid):
        assert manufactured_error(256) <= 5e-4

    def test_second_order_convergence(self):
        e = [manufactured_error(n) for n in (64, 128, 256)]
        for coarse, fine in zip(e, e[1:]):
            assert coarse / fine == pytest.approx(4.0, rel=0.15)

    def test_zero_source_gives_zero(self, grid):
        assert not np.any(solve_state_1d(1.0, np.zeros(grid.n_nodes), grid).values)

    def test_adjoint_zero_residual(self, grid):
        assert not np.any(solve_adjoint_1d(1.0, np.zeros(grid.n_nodes), grid).values)

    def test_adjoint_manufactured(self, grid):
        r = 2 * np.pi ** 2 * np.sin(np.pi * grid.nodes)
        p = solve_adjoint_1d(2.0, r, grid).values
        assert np.max(np.abs(p - np.sin(np.pi * grid.nodes))) <= 5e-4

    def test_adjoint_identity(self, coarse_grid, rng):
        # <p, z> = <u - u*, s(z)> with the discrete inner product of the interior system
        a = np.exp(rng.standard_normal(32))
        z = rng.standard_normal(33)
        z[[0, -1]] = 0
        target = rng.standard_normal(33)
        u = solve_state_1d(a, z, coarse_grid).values
        resid = u - target
        resid[[0, -1]] = 0
        p = solve_adjoint_1d(a, resid, coarse_grid).values
        A = assemble_1d(a, z, coarse_grid).dense()
        assert np.allclose(np.linalg.solve(A, z[1:-1]), u[1:-1], atol=1e-12)
        assert p[1:-1] @ z[1:-1] == pytest.approx(resid[1:-1] @ u[1:-1], rel=1e-10, abs=1e-12)

    def test_batched_factor_matches_single_solves(self, coarse_grid, rng):
        coefs = np.exp(rng.standard_normal((40, 32)))
        z = rng.standard_normal(33)
        fac = TridiagonalFactor(coefs, coarse_grid)
        batch = fac.solve_nodal(np.broadcast_to(z, (40, 33)))
        for k in (0, 17, 39):
            assert np.allclose(batch[k], solve_state_1d(coefs[k], z, coarse_grid).values, atol=1e-12)
        sub = fac.solve_nodal(np.broadcast_to(z, (2, 33)), rows=np.array([3, 7]))
        assert np.allclose(sub, batch[[3, 7]], atol=1e-12)

    def test_small_batch_path_matches_sweep(self, coarse_grid, rng):
        coefs = np.exp(rng.standard_normal((3, 32)))
        rhs = rng.standard_normal((3, 33))
        small = TridiagonalFactor(coefs, coarse_grid).solve_nodal(rhs)
        big = TridiagonalFactor(np.vstack([coefs] * 10), coarse_grid).solve_nodal(np.vstack([rhs] * 10))
        assert np.allclose(small, big[:3], rtol=1e-11, atol=1e-13)


class TestContinuity:
    def test_linearity_in_control(self, grid, rng):
        a = np.exp(0.3 * rng.standard_normal(grid.n_cells))
        z = rng.standard_normal(grid.n_nodes)
        w = rng.standard_normal(grid.n_nodes)
        base = solve_state_1d(a, z, grid).values
        sw = h1_seminorm(solve_state_1d(a, w, grid).values, grid)
        diffs = []
        for eps in (1e-1, 1e-2, 1e-3):
            d = h1_seminorm(solve_state_1d(a, z + eps * w, grid).values - base, grid)
            assert abs(d - eps * sw) <= 1e-10
            diffs.append(d)
        assert diffs[0] > diffs[1] > diffs[2]

    def test_coefficient_continuity_constant_stable_under_refinement(self, rng):
        def ratio(n, eps):
            g = Grid1D(n)
            a = 2 + np.sin(3 * g.midpoints)
            da = eps * np.cos(5 * g.midpoints)
            z = np.ones(g.n_nodes)
            diff = solve_state_1d(a + da, z, g).values - solve_state_1d(a, z, g).values
            return h1_seminorm(diff, g) / np.max(np.abs(da))

        c = max(ratio(32, e) for e in (1e-1, 1e-2))
        for n in (64, 128, 256):
            for eps in (1e-1, 1e-2, 1e-3):
                assert ratio(n, eps) <= 1.1 * c
