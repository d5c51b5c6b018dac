import numpy as np
import pytest

from helpers import random_instance, random_measure
from oracles import w2_squared_1d, w2_squared_permutations
from weakot import (
    SinkhornConfig,
    barycentric_projection,
    make_measure,
    owt_objective,
    solve_exact_ot,
    solve_owt,
    solve_sinkhorn,
    w2_squared,
)
from weakot.errors import (
    DegenerateMarginals,
    InstanceTooLarge,
    NotConverged,
    NumericalUnderflow,
)


class TestExactOt:
    def test_dirac_pair(self):
        mu = make_measure([[0.0]])
        nu = make_measure([[1.0]])
        plan, value = solve_exact_ot(mu, nu)
        assert value == pytest.approx(1.0, abs=1e-12)
        assert plan.matrix == pytest.approx(np.array([[1.0]]))

    def test_monotone_coupling_1d(self):
        mu = make_measure([[0.0], [2.0]])
        nu = make_measure([[1.0], [3.0]])
        assert w2_squared_1d(mu, nu) == pytest.approx(1.0)
        _, value = solve_exact_ot(mu, nu)
        assert value == pytest.approx(1.0, abs=1e-10)

    def test_identical_measures(self):
        rng = np.random.default_rng(0)
        m = random_measure(rng, n=6, weighted=True)
        assert w2_squared(m, m) == pytest.approx(0.0, abs=1e-12)

    def test_matches_permutation_enumeration(self):
        rng = np.random.default_rng(3)
        xs = rng.standard_normal((5, 2))
        ys = rng.standard_normal((5, 2)) + 0.5
        expected = w2_squared_permutations(xs, ys)
        assert w2_squared(make_measure(xs), make_measure(ys)) == pytest.approx(expected, abs=1e-10)

    def test_matches_quantile_coupling_1d(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            mu, nu = random_instance(rng, max_side=7, d=1)
            assert w2_squared(mu, nu) == pytest.approx(w2_squared_1d(mu, nu), abs=1e-9)

    def test_uniform_equal_sizes_give_permutation_plan(self):
        rng = np.random.default_rng(5)
        n = 6
        mu = make_measure(rng.standard_normal((n, 2)))
        nu = make_measure(rng.standard_normal((n, 2)))
        plan, _ = solve_exact_ot(mu, nu)
        entries = np.sort(plan.matrix.ravel())
        assert np.allclose(entries[:-n], 0.0, atol=1e-9)
        assert np.allclose(entries[-n:], 1.0 / n, atol=1e-9)

    def test_instance_cap(self):
        rng = np.random.default_rng(6)
        mu = random_measure(rng, n=4)
        nu = random_measure(rng, n=4)
        with pytest.raises(InstanceTooLarge):
            solve_exact_ot(mu, nu, entry_cap=15)

    def test_zero_weights_rejected(self):
        mu = make_measure([[0.0], [1.0]], [0.0, 1.0])
        nu = make_measure([[0.0], [1.0]])
        with pytest.raises(DegenerateMarginals):
            solve_exact_ot(mu, nu)

    def test_ordering_chain(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            mu = random_measure(rng, n=9, weighted=True)
            nu = random_measure(rng, n=10, shift=0.4, weighted=True)
            weak_value = solve_owt(mu, nu).value
            ot_plan, w2sq = solve_exact_ot(mu, nu)
            weak_cost_of_ot_plan = owt_objective(ot_plan, mu, nu)
            assert weak_value <= weak_cost_of_ot_plan + 1e-6
            assert weak_cost_of_ot_plan <= w2sq + 1e-6
            pushed = barycentric_projection(ot_plan, mu, nu).push()
            assert w2_squared(mu, pushed) <= weak_cost_of_ot_plan + 1e-9


class TestSinkhorn:
    def test_huge_epsilon_gives_independent_plan(self):
        rng = np.random.default_rng(1)
        mu = random_measure(rng, n=5, weighted=True)
        nu = random_measure(rng, n=6, weighted=True)
        diameter_sq = max(mu.support_diameter(), nu.support_diameter()) ** 2
        cfg = SinkhornConfig(epsilon=1e6 * max(diameter_sq, 1.0))
        plan, _ = solve_sinkhorn(mu, nu, cfg)
        assert np.abs(plan.matrix - np.outer(mu.weights, nu.weights)).max() < 1e-6
        images = barycentric_projection(plan, mu, nu).images
        assert np.abs(images - nu.mean()).max() < 1e-6

    def test_dirac_identity(self):
        m = make_measure([[0.0]])
        plan, cost = solve_sinkhorn(m, m, SinkhornConfig(epsilon=1.0))
        assert plan.matrix == pytest.approx(np.array([[1.0]]))
        assert cost == pytest.approx(0.0, abs=1e-15)

    def test_small_epsilon_2x2(self):
        mu = make_measure([[0.0], [1.0]])
        nu = make_measure([[0.2], [0.9]])
        cfg = SinkhornConfig(epsilon=0.1)
        plan, cost = solve_sinkhorn(mu, nu, cfg)
        assert plan.feasibility_gap <= 1e-9
        assert cost >= w2_squared(mu, nu) - 1e-12

    def test_cost_nonincreasing_in_epsilon(self):
        rng = np.random.default_rng(2)
        mu = random_measure(rng, n=6, weighted=True)
        nu = random_measure(rng, n=7, shift=0.5, weighted=True)
        costs = [
            solve_sinkhorn(mu, nu, SinkhornConfig(epsilon=eps)).cost for eps in (5.0, 1.0, 0.1)
        ]
        assert costs[0] >= costs[1] >= costs[2]

    def test_log_and_linear_domains_agree(self):
        rng = np.random.default_rng(3)
        mu = random_measure(rng, n=5, weighted=True)
        nu = random_measure(rng, n=5, weighted=True)
        log_plan, _ = solve_sinkhorn(mu, nu, SinkhornConfig(epsilon=0.8, log_domain=True))
        lin_plan, _ = solve_sinkhorn(mu, nu, SinkhornConfig(epsilon=0.8, log_domain=False))
        assert np.abs(log_plan.matrix - lin_plan.matrix).max() < 1e-7

    def test_kl_reference_is_product_measure(self):
        # at the optimum, eps*log(pi_ij / (a_i b_j)) + C_ij must separate as
        # f_i + g_j; the counting-measure reference would not satisfy this
        # for nonuniform weights
        mu = make_measure([[0.0], [1.0]], [0.2, 0.8])
        nu = make_measure([[0.3], [1.4], [-0.5]], [0.5, 0.25, 0.25])
        eps = 0.7
        plan, _ = solve_sinkhorn(mu, nu, SinkhornConfig(epsilon=eps, marginal_tol=1e-13))
        cost = np.sum((mu.points[:, None, :] - nu.points[None, :, :]) ** 2, axis=2)
        ratio = eps * np.log(plan.matrix / np.outer(mu.weights, nu.weights)) + cost
        interaction = ratio - ratio[:, :1] - ratio[:1, :] + ratio[0, 0]
        assert np.abs(interaction).max() < 1e-9

    def test_linear_domain_underflow(self):
        mu = make_measure([[0.0]])
        nu = make_measure([[100.0]])
        with pytest.raises(NumericalUnderflow):
            solve_sinkhorn(mu, nu, SinkhornConfig(epsilon=1e-3, log_domain=False))

    def test_not_converged_raises(self):
        rng = np.random.default_rng(4)
        mu = random_measure(rng, n=6)
        nu = random_measure(rng, n=6, shift=1.0)
        with pytest.raises(NotConverged):
            solve_sinkhorn(mu, nu, SinkhornConfig(epsilon=0.05, max_iters=2, marginal_tol=1e-12))

    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValueError):
            SinkhornConfig(epsilon=0.0)
