import math

import numpy as np
import pytest

from adabatch import (NoiseAggregates, SmoothnessProfile, brute_force_optimal_tau,
                      enumerate_draws, expected_smoothness, gradient_noise,
                      iteration_bound, make_partitioning, make_strategy,
                      noise_aggregates_exact, optimal_tau, single_partition,
                      smoothness_profile, solve_reference, step_size,
                      stochastic_gradient, total_complexity, verify_noise_formula)
from conftest import ridge_instance


def make_profile(L_i, L, part):
    L_i = np.asarray(L_i, dtype=np.float64)
    if part.K == 1:
        L_Cj = np.array([L])  # the single partition mean is f itself
    else:
        L_Cj = np.array([min(L_i[m].mean(), L) for m in part.members])
    return SmoothnessProfile(L_i=L_i, L=L, L_Cj=L_Cj,
                             Lmax_Cj=np.array([L_i[m].max() for m in part.members]),
                             Lbar_Cj=np.array([L_i[m].mean() for m in part.members]),
                             mu=0.1)


def uniform_aggregates(h, part):
    h = np.asarray(h, dtype=np.float64)
    hbar_Cj = np.array([h[m].mean() for m in part.members])
    # mean-gradient norms unknown here; tests that need them set them explicitly
    return NoiseAggregates(h=h, h_Cj=np.zeros(part.K), hbar_Cj=hbar_Cj, hbar=float(h.mean()))


class TestExpectedSmoothness:
    def test_tau_one_gives_lmax(self):
        part = single_partition(4)
        prof = make_profile([1.0, 2.0, 4.0, 3.0], 2.0, part)
        st = make_strategy("nice", 1, partitioning=part)
        assert expected_smoothness(st, 1, prof) == pytest.approx(4.0, abs=1e-15)

    def test_full_batch_gives_l(self):
        part = single_partition(4)
        prof = make_profile([1.0, 2.0, 4.0, 3.0], 2.0, part)
        st = make_strategy("nice", 4, partitioning=part)
        assert expected_smoothness(st, 4, prof) == pytest.approx(2.0, abs=1e-15)

    def test_hand_computed_interior_value(self):
        # n=4, L=2, Lmax=4, tau=2: 4*1*2/(2*3) + 2*4/(2*3) = 8/3
        part = single_partition(4)
        prof = make_profile([4.0, 1.0, 1.0, 1.0], 2.0, part)
        st = make_strategy("nice", 2, partitioning=part)
        got = expected_smoothness(st, 2, prof)
        assert got == pytest.approx(8.0 / 3.0, abs=1e-14)
        # cross-check against the K=1 partition formula
        pst = make_strategy("partition_nice", 2, partitioning=part)
        assert expected_smoothness(pst, 2, prof) == pytest.approx(got, abs=1e-14)

    def test_singleton_partition_rejected(self):
        part = make_partitioning(4, sizes=[3, 1])
        prof = make_profile([1.0] * 4, 1.0, part)
        st = make_strategy("partition_independent", 1, partitioning=part)
        with pytest.raises(ValueError):
            st2 = make_strategy("partition_nice", 1, partitioning=part)
        # the formula itself also guards
        assert expected_smoothness(st, 1, prof) > 0


class TestGradientNoise:
    def test_full_batch_at_optimum_is_zero(self):
        part = single_partition(4)
        agg = uniform_aggregates([1.0, 1.0, 1.0, 1.0], part)
        st = make_strategy("nice", 4, partitioning=part)
        assert gradient_noise(st, 4, agg) == pytest.approx(0.0, abs=1e-15)

    def test_tau_one_at_optimum_is_mean_h(self):
        part = single_partition(4)
        agg = uniform_aggregates([1.0, 2.0, 3.0, 4.0], part)
        st = make_strategy("nice", 1, partitioning=part)
        assert gradient_noise(st, 1, agg) == pytest.approx(2.5, abs=1e-14)

    def test_hand_computed_interior_value(self):
        # n=4, h*=[1,1,1,1], tau=2: (n-tau)/(n tau (n-1)) * sum h = 2*4/(4*2*3) = 1/3
        part = single_partition(4)
        agg = uniform_aggregates([1.0, 1.0, 1.0, 1.0], part)
        st = make_strategy("nice", 2, partitioning=part)
        assert gradient_noise(st, 2, agg) == pytest.approx(1.0 / 3.0, abs=1e-14)


class TestStepSize:
    def test_zero_noise_gives_smoothness_step(self):
        assert step_size(2.0, 0.0, 0.1, 0.5) == pytest.approx(0.25)
        assert step_size(2.0, 0.0, 0.1, 0.5, cap=5.0) == pytest.approx(0.25)

    def test_hand_computed_noise_branch(self):
        # L=4, eps=0.1, mu=0.5, sigma=1, C=10: min(10,2)=2 -> eps*mu/2 = 0.025 -> gamma 0.0125
        assert step_size(4.0, 1.0, 0.1, 0.5, cap=10.0) == pytest.approx(0.0125, abs=1e-15)

    def test_tiny_noise_smoothness_limited(self):
        assert step_size(2.0, 1e-12, 0.1, 0.5) == pytest.approx(0.25)

    def test_validation(self):
        with pytest.raises(ValueError):
            step_size(0.0, 1.0, 0.1, 0.5)
        with pytest.raises(ValueError):
            step_size(1.0, -1.0, 0.1, 0.5)


class TestIterationBound:
    def test_already_inside_is_zero(self):
        assert iteration_bound(1.0, 1.0, 0.1, 0.5, x0_dist_sq=0.05) == 0

    def test_noise_free_specialization(self):
        L, mu, eps, D2 = 3.0, 0.5, 0.1, 4.0
        k = iteration_bound(L, 0.0, eps, mu, D2)
        assert k == math.ceil((2 * L / mu) * math.log(2 * D2 / eps))

    def test_hand_computed(self):
        # (2/0.5) * max(4, 2/(0.1*0.5)) * log(20) = 160 * log(20) ~ 479.3 -> 480
        assert iteration_bound(4.0, 1.0, 0.1, 0.5, 1.0) == 480


def feasible_strategies(part):
    variants = ["partition_nice", "partition_independent"]
    if part.K == 1:
        variants = ["nice", "independent"] + variants
    return variants


class TestFormulaVsEnumeration:
    """sigma(x, tau) formulas are exact: checked against full-support
    enumeration for every variant and feasible tau."""

    @pytest.mark.parametrize("variant", ["nice", "independent"])
    def test_single_partition_exactness(self, variant):
        obj = ridge_instance(10 if variant == "nice" else 8, 4, seed=31)
        part = single_partition(obj.n)
        rng = np.random.default_rng(9)
        x_star = solve_reference(obj, tol=1e-13)
        points = [x_star] + [rng.standard_normal(4) for _ in range(20)]
        for tau in range(1, part.min_size + 1):
            st = make_strategy(variant, tau, partitioning=part)
            for x in points:
                agg = noise_aggregates_exact(obj, part, x)
                sf = gradient_noise(st, tau, agg)
                se = 0.0
                for d, prob in enumerate_draws(st):
                    g = stochastic_gradient(obj, d, x)
                    se += prob * float(g @ g)
                assert abs(sf - se) <= 1e-9 * (1 + se)

    @pytest.mark.parametrize("variant", ["partition_nice", "partition_independent"])
    def test_partition_exactness(self, variant):
        obj = ridge_instance(9, 4, seed=32)
        part = make_partitioning(9, sizes=[5, 4], q=[0.45, 0.55])
        rng = np.random.default_rng(10)
        points = [rng.standard_normal(4) for _ in range(20)]
        for tau in range(1, part.min_size + 1):
            st = make_strategy(variant, tau, partitioning=part)
            for x in points:
                agg = noise_aggregates_exact(obj, part, x)
                sf = gradient_noise(st, tau, agg)
                se = sum(prob * float(np.sum(stochastic_gradient(obj, d, x) ** 2))
                         for d, prob in enumerate_draws(st))
                assert abs(sf - se) <= 1e-9 * (1 + se)


def test_expected_smoothness_upper_bound_holds(small_ridge, small_partitioning):
    obj = small_ridge
    x_star = solve_reference(obj, tol=1e-13)
    prof_p = smoothness_profile(obj, small_partitioning)
    prof_s = smoothness_profile(obj, single_partition(8))
    rng = np.random.default_rng(11)
    for x in [rng.standard_normal(5) for _ in range(10)]:
        for part, prof, variants in ((small_partitioning, prof_p,
                                      ["partition_nice", "partition_independent"]),
                                     (single_partition(8), prof_s,
                                      ["nice", "independent"])):
            for variant in variants:
                for tau in (1, part.min_size):
                    st = make_strategy(variant, tau, partitioning=part)
                    rep = verify_noise_formula(st, tau, obj, x, x_star=x_star, profile=prof)
                    assert rep.bound_lhs <= rep.bound_rhs + 1e-9


def test_single_partition_formulas_equal_dedicated_paths():
    obj = ridge_instance(7, 3, seed=33)
    part = single_partition(7)
    prof = smoothness_profile(obj, part)
    x = np.random.default_rng(12).standard_normal(3)
    agg = noise_aggregates_exact(obj, part, x)
    for tau in range(1, 8):
        nice = make_strategy("nice", tau, partitioning=part)
        pnice = make_strategy("partition_nice", tau, partitioning=part)
        assert expected_smoothness(nice, tau, prof) == pytest.approx(
            expected_smoothness(pnice, tau, prof), abs=1e-12)
        assert gradient_noise(nice, tau, agg) == pytest.approx(
            gradient_noise(pnice, tau, agg), abs=1e-12)
        ind = make_strategy("independent", tau, partitioning=part)
        pind = make_strategy("partition_independent", tau, partitioning=part)
        assert expected_smoothness(ind, tau, prof) == pytest.approx(
            expected_smoothness(pind, tau, prof), abs=1e-12)
        assert gradient_noise(ind, tau, agg) == pytest.approx(
            gradient_noise(pind, tau, agg), abs=1e-12)


def test_monotone_branches_for_nice_sampling():
    obj = ridge_instance(12, 5, seed=34)
    part = single_partition(12)
    prof = smoothness_profile(obj, part)
    x_star = solve_reference(obj, tol=1e-13)
    agg = noise_aggregates_exact(obj, part, x_star)
    st = make_strategy("nice", 1, partitioning=part)
    smooth = [t * expected_smoothness(st, t, prof) for t in range(1, 13)]
    noise = [t * gradient_noise(st, t, agg) for t in range(1, 13)]
    assert np.all(np.diff(smooth) >= -1e-12)
    assert np.all(np.diff(noise) <= 1e-12)


def test_noise_aggregates_exact_consistency():
    obj = ridge_instance(10, 4, seed=35)
    part = make_partitioning(10, k=2)
    x_star = solve_reference(obj, tol=1e-12)
    agg = noise_aggregates_exact(obj, part, x_star)
    # partition mean gradients average to the (vanishing) full gradient
    sums = np.zeros(4)
    for j, m in enumerate(part.members):
        mean_j = np.mean([obj.component_gradient(i, x_star) for i in m], axis=0)
        sums += part.sizes[j] * mean_j
        assert np.linalg.norm(mean_j) ** 2 == pytest.approx(agg.h_Cj[j], rel=1e-9, abs=1e-15)
    assert np.linalg.norm(sums / 10) <= 1e-8
    # Jensen on random points
    x = np.random.default_rng(13).standard_normal(4)
    agg_x = noise_aggregates_exact(obj, part, x)
    assert np.all(agg_x.h_Cj <= agg_x.hbar_Cj + 1e-12)
    # single partition: h_C equals the full gradient's squared norm
    sp = single_partition(10)
    agg_s = noise_aggregates_exact(obj, sp, x)
    assert agg_s.h_Cj[0] == pytest.approx(np.linalg.norm(obj.full_gradient(x)) ** 2, rel=1e-10)


class TestTotalComplexityAndOptimalTau:
    def test_interpolation_argmin_is_one(self):
        obj = ridge_instance(12, 5, seed=36, noise=0.0, lam=1e-7)
        part = single_partition(12)
        prof = smoothness_profile(obj, part)
        x_star = solve_reference(obj, tol=1e-13)
        agg = noise_aggregates_exact(obj, part, x_star)
        st = make_strategy("nice", 1, partitioning=part)
        assert optimal_tau(st, prof, agg, 1e-3, prof.mu) == 1
        assert brute_force_optimal_tau(st, prof, agg, 1e-3, prof.mu) == 1

    def test_gate_all_h_zero_gives_one(self):
        part = single_partition(6)
        prof = make_profile([2.0] * 6, 1.5, part)
        agg = NoiseAggregates(h=np.zeros(6), h_Cj=np.zeros(1), hbar_Cj=np.zeros(1), hbar=0.0)
        st = make_strategy("nice", 1, partitioning=part)
        assert optimal_tau(st, prof, agg, 1e-3, prof.mu) == 1

    def test_vanishing_eps_pushes_tau_to_n(self):
        obj = ridge_instance(15, 5, seed=37, noise=0.3)
        part = single_partition(15)
        prof = smoothness_profile(obj, part)
        x_star = solve_reference(obj, tol=1e-13)
        agg = noise_aggregates_exact(obj, part, x_star)
        st = make_strategy("nice", 1, partitioning=part)
        assert optimal_tau(st, prof, agg, 1e-9, prof.mu) == 15

    def test_total_complexity_v_shape(self):
        obj = ridge_instance(20, 6, seed=38, noise=0.2, lam=0.5, x_scale=0.3)
        part = single_partition(20)
        prof = smoothness_profile(obj, part)
        x_star = solve_reference(obj, tol=1e-13)
        agg = noise_aggregates_exact(obj, part, x_star)
        st = make_strategy("nice", 1, partitioning=part)
        T = [total_complexity(st, t, prof, agg, 1e-3, prof.mu, 10.0).value for t in range(1, 21)]
        # decreasing to the argmin, then non-decreasing
        k = int(np.argmin(T))
        assert np.all(np.diff(T[:k + 1]) <= 1e-9)
        assert np.all(np.diff(T[k:]) >= -1e-9)

    @pytest.mark.parametrize("variant", ["nice", "independent"])
    def test_matches_brute_force_scan(self, variant):
        obj = ridge_instance(20, 6, seed=39, noise=0.2, lam=0.5, x_scale=0.3)
        part = single_partition(20)
        prof = smoothness_profile(obj, part)
        x_star = solve_reference(obj, tol=1e-13)
        agg = noise_aggregates_exact(obj, part, x_star)
        st = make_strategy(variant, 1, partitioning=part)
        closed = optimal_tau(st, prof, agg, 1e-3, prof.mu)
        brute = brute_force_optimal_tau(st, prof, agg, 1e-3, prof.mu)
        assert abs(closed - brute) <= 1

    def test_zero_denominator_falls_back_to_scan(self, caplog):
        # L = Lmax/n and h_Cj = hbar/n make both denominators vanish
        part = single_partition(2)
        prof = SmoothnessProfile(L_i=np.array([2.0, 2.0]), L=1.0, L_Cj=np.array([1.0]),
                                 Lmax_Cj=np.array([2.0]), Lbar_Cj=np.array([2.0]), mu=0.1)
        agg = NoiseAggregates(h=np.array([1.0, 1.0]), h_Cj=np.array([0.5]),
                              hbar_Cj=np.array([1.0]), hbar=1.0)
        st = make_strategy("nice", 1, partitioning=part)
        with caplog.at_level("WARNING"):
            got = optimal_tau(st, prof, agg, 1e-3, 0.1)
        assert got == brute_force_optimal_tau(st, prof, agg, 1e-3, 0.1)
        assert any("brute-force" in r.message for r in caplog.records)

    def test_explicit_p_rejected(self):
        part = single_partition(4)
        prof = make_profile([1.0] * 4, 1.0, part)
        agg = uniform_aggregates([1.0] * 4, part)
        st = make_strategy("independent", 2, partitioning=part,
                           p=np.array([0.9, 0.5, 0.3, 0.3]))
        with pytest.raises(ValueError, match="rule"):
            optimal_tau(st, prof, agg, 1e-3, 0.1)


class TestVerifyNoiseFormula:
    def test_full_batch_report_is_exact(self, small_ridge):
        part = single_partition(8)
        st = make_strategy("partition_nice", 8, partitioning=part)
        x = np.random.default_rng(14).standard_normal(5)
        rep = verify_noise_formula(st, 8, small_ridge, x)
        g2 = float(np.linalg.norm(small_ridge.full_gradient(x)) ** 2)
        assert rep.sigma_enumerated == pytest.approx(g2, rel=1e-10)
        assert rep.abs_diff <= 1e-12 * (1 + g2)

    def test_nice_all_taus_tight(self):
        obj = ridge_instance(6, 3, seed=40)
        part = single_partition(6)
        x = np.random.default_rng(15).standard_normal(3)
        for tau in range(1, 7):
            st = make_strategy("nice", tau, partitioning=part)
            rep = verify_noise_formula(st, tau, obj, x)
            assert rep.abs_diff <= 1e-10
            assert rep.prob_total == pytest.approx(1.0, abs=1e-12)

    def test_independent_bound_many_points(self):
        obj = ridge_instance(6, 3, seed=41)
        part = single_partition(6)
        x_star = solve_reference(obj, tol=1e-13)
        prof = smoothness_profile(obj, part)
        rng = np.random.default_rng(16)
        st = make_strategy("independent", 2, partitioning=part)
        for _ in range(50):
            x = rng.standard_normal(3)
            rep = verify_noise_formula(st, 2, obj, x, x_star=x_star, profile=prof)
            assert rep.bound_ok
