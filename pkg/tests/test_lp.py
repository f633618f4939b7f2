import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rockrelax.lp import TSubproblem, bounded_simplex, deleted_mask, enumerate_vertices, solve_t_lp


def uniform(costs, theta, stringent=True):
    n = len(costs)
    return TSubproblem(np.asarray(costs, float), np.full(n, 1.0 / n), theta, stringent)


def assert_feasible(prob, t):
    lo, hi = prob.bounds()
    assert abs(t.sum()) <= 1e-12
    assert np.all(t >= lo) and np.all(t <= hi)


class TestSolve:
    def test_equal_costs(self):
        assert not np.any(solve_t_lp(uniform([3.0] * 5, 0.1)))

    def test_full_swap(self):
        prob = uniform([10.0, 0.0], 0.05)
        t = solve_t_lp(prob)
        assert np.allclose(t, [-0.5, 0.5])
        assert prob.objective(t) == pytest.approx(-4.95)

    def test_large_theta_blocks_transfer(self):
        c = np.array([1.0, 4.0, 2.5, 0.3])
        assert not np.any(solve_t_lp(uniform(c, np.ptp(c) + 0.01)))

    def test_single_sample(self):
        assert np.array_equal(solve_t_lp(uniform([2.0], 0.1)), [0.0])
        assert np.array_equal(enumerate_vertices(uniform([2.0], 0.1)), [0.0])

    def test_deletes_expensive_samples(self):
        c = np.zeros(10)
        c[:3] = 5.0
        prob = uniform(c, 0.05)
        t = solve_t_lp(prob)
        assert_feasible(prob, t)
        assert deleted_mask(prob.probs, t).tolist() == [True] * 3 + [False] * 7

    def test_relaxed_bounds(self):
        prob = TSubproblem(np.array([5.0, 0.0, 0.0]), np.array([0.2, 0.4, 0.4]), 0.0, False)
        t = solve_t_lp(prob)
        assert_feasible(prob, t)
        assert t[0] == pytest.approx(-0.2)
        assert prob.objective(t) == pytest.approx(-1.0)

    def test_never_worse_than_zero(self, rng):
        for _ in range(20):
            prob = uniform(rng.uniform(0, 10, 40), rng.uniform(0, 1))
            t = solve_t_lp(prob)
            assert_feasible(prob, t)
            assert prob.objective(t) <= 1e-12

    def test_zero_theta_greedy(self):
        c = np.array([3.0, 9.0, 1.0, 5.0])
        prob = uniform(c, 0.0)
        t = solve_t_lp(prob)
        # stringent bounds: the top half of costs donate all mass to the bottom half
        assert np.allclose(t, [0.25, -0.25, 0.25, -0.25])
        assert np.allclose(enumerate_vertices(prob), t)

    def test_oracle_agreement_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(1, 7))
            probs = rng.dirichlet(np.ones(n))
            prob = TSubproblem(rng.uniform(0, 10, n), probs, rng.uniform(0, 1),
                               bool(rng.integers(2)))
            t = solve_t_lp(prob)
            assert_feasible(prob, t)
            assert prob.objective(t) == pytest.approx(prob.objective(enumerate_vertices(prob)),
                                                      abs=1e-9)

    def test_ties_are_deterministic(self):
        prob = uniform([1.0, 1.0, 0.0, 0.0], 0.1)
        assert np.array_equal(solve_t_lp(prob), solve_t_lp(prob))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 10), min_size=2, max_size=6), st.floats(0, 1))
    def test_oracle_property(self, costs, theta):
        prob = uniform(costs, theta)
        t = solve_t_lp(prob)
        assert_feasible(prob, t)
        assert prob.objective(t) == pytest.approx(prob.objective(enumerate_vertices(prob)), abs=1e-9)


class TestSimplexCore:
    def test_small_lp(self):
        # min -x - y  s.t. x + y = 1.5, 0 <= x, y <= 1
        x = bounded_simplex([-1.0, -2.0], [[1.0, 1.0]], [1.5], [0, 0], [1, 1])
        assert np.allclose(x, [0.5, 1.0])

    def test_infeasible(self):
        with pytest.raises(ValueError):
            bounded_simplex([1.0, 1.0], [[1.0, 1.0]], [5.0], [0, 0], [1, 1])


class TestValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            TSubproblem(np.ones(3), np.ones(2) / 2, 0.1)

    def test_negative_theta(self):
        with pytest.raises(ValueError):
            uniform([1.0, 2.0], -0.1)

    def test_enumeration_limit(self):
        with pytest.raises(ValueError):
            enumerate_vertices(uniform(np.arange(9.0), 0.1))

    def test_deletion_threshold(self):
        p = np.full(4, 0.25)
        t = np.array([-0.25, -0.25 + 1e-12, -0.2, 0.7 - 1e-12])
        assert deleted_mask(p, t).tolist() == [True, True, False, False]
