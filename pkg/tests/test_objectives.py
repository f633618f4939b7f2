import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rockrelax.elliptic_2d import assemble_mass, solve_state_2d
from rockrelax.exceptions import InfeasibleError
from rockrelax.mesh import Grid1D
from rockrelax.objectives import (L1ReweightedSAA, RockafellianConfig, SAAObjective1D,
                                  SupportShiftObjective2D, TwoAtomRockafellian, grad_z_saa,
                                  objective_saa, rock_grad_ex1, rock_grad_t_ex3, rock_grad_z_ex3,
                                  rock_objective_ex1, rock_objective_ex2, rock_objective_ex3,
                                  t_subproblem_costs)
from rockrelax.random_field import (DiscreteDistribution, KKLCoefficient, corrupt_samples,
                                    eval_osc, sample_standard_normal)

G = Grid1D(64)


def kkl_saa(n=12, m=0, alpha=1e-4, seed=5, grid=G):
    s = corrupt_samples(sample_standard_normal(n, 10, seed), m)
    coef = KKLCoefficient(0.4, 10)(grid.midpoints, s.samples)
    return SAAObjective1D(grid, coef, np.full(n, 1.0 / n), None, alpha)


def directional_fd(f, x, d):
    h = 1e-6 * (1 + np.linalg.norm(x))
    return (f(x + h * d) - f(x - h * d)) / (2 * h)


class TestSAA:
    def test_zero_control_zero_target(self):
        dist = DiscreteDistribution([1.0, 3.0], [0.5, 0.5])
        z = np.zeros(G.n_nodes)
        assert objective_saa(z, dist, G, target=np.zeros(G.n_nodes)) == 0.0
        assert not np.any(grad_z_saa(z, dist, G, target=np.zeros(G.n_nodes)))

    def test_manufactured_state_equals_target(self):
        g = Grid1D(256)
        z = 2 * np.pi ** 2 * np.sin(np.pi * g.nodes)
        val = objective_saa(z, DiscreteDistribution([2.0], [1.0]), g,
                            target=np.sin(np.pi * g.nodes), alpha=1e-4)
        reg = 0.5e-4 * g.inner(z, z)
        assert val == pytest.approx(reg, abs=1e-6)

    def test_permutation_invariance(self, rng):
        z = rng.standard_normal(G.n_nodes)
        a = objective_saa(z, DiscreteDistribution([0.5, 1.0, 4.0], [0.2, 0.3, 0.5]), G)
        b = objective_saa(z, DiscreteDistribution([4.0, 0.5, 1.0], [0.5, 0.2, 0.3]), G)
        assert a == pytest.approx(b, rel=1e-14)

    def test_gradient_finite_differences(self, rng):
        saa = kkl_saa()
        z = 1 + rng.standard_normal(G.n_nodes)
        g = saa.gradient(z)
        for _ in range(15):
            d = rng.standard_normal(G.n_nodes)
            fd = directional_fd(saa.value, z, d)
            assert G.inner(g, d) == pytest.approx(fd, rel=1e-4)

    def test_empty_measure_leaves_regulariser(self, rng):
        saa = kkl_saa()
        z = rng.standard_normal(G.n_nodes)
        assert np.array_equal(saa.gradient(z, np.zeros(saa.n_samples)), saa.alpha * z)

    @settings(max_examples=30, deadline=None)
    @given(arrays(float, G.n_nodes, elements=st.floats(-50, 50)))
    def test_bounded_below_by_regulariser(self, z):
        saa = kkl_saa(n=3)
        assert saa.value(z) >= saa.regularizer(z) - 1e-15

    def test_solve_reaches_tolerance(self):
        saa = kkl_saa()
        z, rep = saa.solve(np.ones(G.n_nodes), gtol=1e-6)
        assert rep.termination_reason.value == "tolerance"
        assert G.norm(saa.gradient(z)) < 1e-6


class TestCosts:
    def test_zero_when_target_is_a_state(self, rng):
        saa = kkl_saa()
        z = rng.standard_normal(G.n_nodes)
        u3 = saa.states(z)[3].copy()
        other = SAAObjective1D(G, saa.coef_mid, saa.probs, u3, saa.alpha)
        c = t_subproblem_costs(z, other)
        assert c[3] == pytest.approx(0.0, abs=1e-28)
        assert np.all(c >= 0)

    def test_mirror_invariance(self, rng):
        # reflecting x -> 1 - x reorders the mesh nodes but leaves every cost unchanged
        saa = kkl_saa()
        z = rng.standard_normal(G.n_nodes)
        mirrored = SAAObjective1D(G, saa.coef_mid[:, ::-1], saa.probs, None, saa.alpha)
        assert np.allclose(t_subproblem_costs(z, saa), t_subproblem_costs(z[::-1], mirrored),
                           rtol=1e-11)

    def test_corrupted_samples_cost_more(self):
        g = Grid1D(128)
        clean = kkl_saa(n=200, seed=9, grid=g)
        z_true, _ = clean.solve(np.ones(g.n_nodes))
        dirty = kkl_saa(n=200, m=20, seed=9, grid=g)
        c = t_subproblem_costs(z_true, dirty)
        assert np.median(c[:20]) > np.median(c[20:])


class TestTwoAtom:
    cfg = RockafellianConfig(theta=1.0, alpha=1e-4)

    def test_anchor_is_corrupted_objective(self, rng):
        z = rng.standard_normal(G.n_nodes)
        dist = DiscreteDistribution([0.2, 2.0], [0.05, 0.95])
        phi = objective_saa(z, dist, G, target=np.sin(np.pi * G.nodes), alpha=1e-4)
        assert rock_objective_ex1(z, 0.0, 0.05, self.cfg, G) == phi

    def test_t_gradient(self, rng):
        z = rng.standard_normal(G.n_nodes)
        for t2 in (-0.3, 0.0, 0.02):
            _, gt = rock_grad_ex1(z, t2, 0.05, self.cfg, G)
            fd = directional_fd(lambda t: rock_objective_ex1(z, t[0], 0.05, self.cfg, G),
                                np.array([t2]), np.array([1.0]))
            assert gt == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_t_gradient_formula(self, rng):
        prob = TwoAtomRockafellian(0.05, self.cfg, G)
        z = rng.standard_normal(G.n_nodes)
        c = prob.saa.misfits(z)
        assert prob.gradient(z, 0.01)[1] == pytest.approx(0.5 * (c[1] - c[0]) + 0.02)

    def test_z_gradient(self, rng):
        prob = TwoAtomRockafellian(0.05, self.cfg, G)
        z = rng.standard_normal(G.n_nodes)
        gz, _ = prob.gradient(z, 0.01)
        for _ in range(5):
            d = rng.standard_normal(G.n_nodes)
            assert G.inner(gz, d) == pytest.approx(
                directional_fd(lambda v: prob.value(v, 0.01), z, d), rel=1e-4)

    @pytest.mark.parametrize("t2", [-0.96, 0.06])
    def test_infeasible(self, t2):
        with pytest.raises(InfeasibleError):
            rock_objective_ex1(np.zeros(G.n_nodes), t2, 0.05, self.cfg, G)

    def test_bounds_orientation(self):
        prob = TwoAtomRockafellian(0.05, self.cfg, G)
        assert prob.bounds == pytest.approx((-0.95, 0.05))
        # t2 = eps removes the low-coefficient atom
        assert prob.weights(0.05).tolist() == [0.0, 1.0]

    def test_theta_monotone(self, rng):
        z = rng.standard_normal(G.n_nodes)
        lo = TwoAtomRockafellian(0.05, RockafellianConfig(theta=0.5), G).value(z, 0.03)
        hi = TwoAtomRockafellian(0.05, RockafellianConfig(theta=2.0), G).value(z, 0.03)
        assert hi > lo


class _FixedCosts:
    """Stand-in SAA with prescribed misfits and no regulariser."""

    def __init__(self, misfits, probs):
        self.c = np.asarray(misfits, float)
        self.probs = np.asarray(probs, float)

    def value(self, z, weights=None):
        w = self.probs if weights is None else weights
        return 0.5 * float(w @ self.c)


class TestL1:
    def test_two_sample_arithmetic(self):
        prob = L1ReweightedSAA(_FixedCosts([4.0, 0.0], [0.5, 0.5]), theta=0.1)
        delta = prob.value(None, [-0.5, 0.5]) - prob.value(None, [0.0, 0.0])
        assert delta == pytest.approx(-0.9)

    def test_anchor(self, rng):
        saa = kkl_saa(m=2)
        z = rng.standard_normal(G.n_nodes)
        cfg = RockafellianConfig(theta=5e-2)
        assert rock_objective_ex2(z, np.zeros(saa.n_samples), saa, cfg) == saa.value(z)

    def test_additive_in_theta(self, rng):
        saa = kkl_saa()
        z = rng.standard_normal(G.n_nodes)
        t = np.zeros(saa.n_samples)
        t[0], t[5] = -1 / 12, 1 / 12
        a = rock_objective_ex2(z, t, saa, RockafellianConfig(theta=0.1))
        b = rock_objective_ex2(z, t, saa, RockafellianConfig(theta=0.3))
        assert b == pytest.approx(a + 0.2 * np.abs(t).sum(), rel=1e-13)

    def test_formula(self, rng):
        saa = kkl_saa()
        z = rng.standard_normal(G.n_nodes)
        t = np.zeros(saa.n_samples)
        t[2], t[7] = -1 / 12, 1 / 12
        c = saa.misfits(z)
        expected = 0.5 * (saa.probs + t) @ c + saa.regularizer(z) + 0.05 * np.abs(t).sum()
        assert rock_objective_ex2(z, t, saa, RockafellianConfig(theta=0.05)) == pytest.approx(expected)

    @pytest.mark.parametrize("t", [[0.1, 0.0] + [0.0] * 10, [-0.1, 0.1] + [0.0] * 10])
    def test_infeasible(self, t):
        with pytest.raises(InfeasibleError):
            rock_objective_ex2(np.zeros(G.n_nodes), np.array(t), kkl_saa(), RockafellianConfig())

    def test_relaxed_bounds_allow_larger_transfers(self):
        saa = kkl_saa()
        t = np.zeros(12)
        t[0], t[1] = 1 / 12, -1 / 12
        t[0] += 1 / 12
        t[2] = -1 / 12
        with pytest.raises(InfeasibleError):
            rock_objective_ex2(np.zeros(G.n_nodes), t, saa, RockafellianConfig())
        rock_objective_ex2(np.zeros(G.n_nodes), t, saa, RockafellianConfig(), stringent_bounds=False)


@pytest.fixture(scope="module")
def shifted(small_disk):
    return SupportShiftObjective2D.uniform(small_disk, 3.5, 0.4, 8, theta=0.1)


class TestSupportShift:
    def test_anchor_matches_direct_evaluation(self, small_disk, shifted, rng):
        z = 1 + 0.1 * rng.standard_normal(small_disk.n_dof)
        M = assemble_mass(small_disk)
        total = 0.5e-5 * z @ (M @ z)
        for xi, w in zip(shifted.nodes, shifted.weights):
            u = solve_state_2d(small_disk, lambda x, y: eval_osc(xi, np.stack([x, y], -1)), z,
                               method="direct").values
            total += 0.5 * w * (u - 1) @ (M @ (u - 1))
        assert rock_objective_ex3(z, np.zeros(8), shifted) == pytest.approx(total, rel=1e-10)

    def test_weights_are_probabilities(self, shifted):
        assert shifted.weights.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(shifted.nodes > 3.1) and np.all(shifted.nodes < 3.9)

    def test_t_gradient_finite_differences(self, small_disk, shifted, rng):
        z = 1 + 0.5 * rng.standard_normal(small_disk.n_dof)
        t = np.linspace(0.01, -0.01, 8)
        g = rock_grad_t_ex3(z, t, shifted)
        h = 1e-6 * (1 + np.linalg.norm(t))
        for j in range(8):
            e = np.zeros(8)
            e[j] = h
            fd = (shifted.value(z, t + e) - shifted.value(z, t - e)) / (2 * h)
            assert g[j] == pytest.approx(fd, rel=1e-5)

    def test_z_gradient_finite_differences(self, small_disk, shifted, rng):
        M = assemble_mass(small_disk)
        z = 1 + 0.5 * rng.standard_normal(small_disk.n_dof)
        t = np.linspace(0.02, -0.02, 8)
        g = rock_grad_z_ex3(z, t, shifted)
        for _ in range(5):
            d = rng.standard_normal(small_disk.n_dof)
            fd = directional_fd(lambda v: shifted.value(v, t), z, d)
            assert g @ (M @ d) == pytest.approx(fd, rel=1e-3)

    def test_infeasible_shift(self, shifted, small_disk):
        t = np.zeros(8)
        t[-1] = 0.5
        with pytest.raises(InfeasibleError):
            shifted.value(np.ones(small_disk.n_dof), t)

    def test_shrinking_support_approaches_deterministic(self, small_disk, rng):
        z = 1 + 0.1 * rng.standard_normal(small_disk.n_dof)
        det = SupportShiftObjective2D.deterministic(small_disk, 3.5).value(z, np.zeros(1))
        gaps = [abs(SupportShiftObjective2D.uniform(small_disk, 3.5, d).value(z, np.zeros(8)) - det)
                for d in (0.2, 0.05, 0.0125)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] / det < 1e-3

    def test_penalty_uses_quadrature_weights(self, small_disk, shifted):
        z = np.ones(small_disk.n_dof)
        t = np.full(8, -0.01)
        other = SupportShiftObjective2D.uniform(small_disk, 3.5, 0.4, 8, theta=0.3)
        diff = other.value(z, t) - shifted.value(z, t)
        assert diff == pytest.approx(0.5 * 0.2 * 0.01 ** 2, rel=1e-10)
