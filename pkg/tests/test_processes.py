import math

import numpy as np
import pytest

from mixbound import (IntervalUnion, arcones_check, bounded_ar1,
                      choose_mdp_blocking, exact_alpha_two_state,
                      exact_tail_small, ibragimov_indicator_sweep, indicator,
                      interval_sum, mc_tail, process_spec_from_json,
                      rademacher, simulate, two_state_chain, uniform_centered,
                      verify_ibragimov, wilson_interval)
from mixbound.processes import chain_covariance

CHAIN = two_state_chain(0.3, 0.3)


def test_chain_spec_derived_quantities():
    assert CHAIN.mean == pytest.approx(0.0)
    assert CHAIN.var == pytest.approx(1.0)
    assert CHAIN.M == 1.0
    assert CHAIN.profile.lambda2 == pytest.approx(0.4)


def test_asymmetric_chain_centering():
    spec = two_state_chain(0.2, 0.6, values=(0.0, 3.0))
    # stationary weight on the second state is p/(p+q) = 0.25
    assert spec.mean == pytest.approx(0.75)
    assert spec.M == pytest.approx(2.25)
    path = simulate(spec, 2000, seed=5)
    assert np.all(np.abs(path.values) <= spec.M + 1e-12)
    assert abs(path.values.mean()) < 0.1


def test_chain_covariance_series():
    for k in range(5):
        assert chain_covariance(CHAIN, k) == pytest.approx(0.4 ** k if k else 1.0)


def test_simulate_rademacher_support():
    path = simulate(rademacher(), 500, seed=1)
    assert set(np.unique(path.values)) == {-1.0, 1.0}


def test_simulate_deterministic():
    a = simulate(CHAIN, 100, seed=9).values
    b = simulate(CHAIN, 100, seed=9).values
    c = simulate(CHAIN, 100, seed=10).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_simulate_chain_lag1_autocorrelation():
    path = simulate(CHAIN, 200_000, seed=12).values
    r1 = np.mean(path[:-1] * path[1:])
    assert r1 == pytest.approx(0.4, abs=0.02)


def test_simulate_general_chain_matches_transition_frequencies():
    spec = two_state_chain(0.2, 0.5)
    path = simulate(spec, 100_000, seed=3).values
    b_val = spec.values[1] - spec.mean
    is_b = np.isclose(path, b_val)
    # empirical switch frequency out of each state
    a_to_b = np.mean(is_b[1:][~is_b[:-1]])
    b_to_a = np.mean(~is_b[1:][is_b[:-1]])
    assert a_to_b == pytest.approx(0.2, abs=0.01)
    assert b_to_a == pytest.approx(0.5, abs=0.015)


def test_simulate_ar1_bounded_and_mixing():
    spec = bounded_ar1(0.6, width=1.0)
    path = simulate(spec, 50_000, seed=4).values
    assert np.all(np.abs(path) <= spec.M + 1e-12)
    r1 = np.corrcoef(path[:-1], path[1:])[0, 1]
    assert r1 == pytest.approx(0.6, abs=0.02)


def test_uniform_support():
    spec = uniform_centered(2.5)
    path = simulate(spec, 10_000, seed=2).values
    assert np.all(np.abs(path) <= 2.5)


def test_process_spec_json_round_trip():
    for spec in (CHAIN, rademacher(), uniform_centered(2.0), bounded_ar1(0.5)):
        back = process_spec_from_json(spec.to_json())
        assert back.kind == spec.kind
        assert back.M == pytest.approx(spec.M)


def test_interval_sum_full_interval_is_partial_sum():
    path = simulate(CHAIN, 50, seed=6)
    region = IntervalUnion(((0.0, 50.0),))
    assert interval_sum(path, region) == pytest.approx(path.values.sum(), rel=1e-12)


def test_interval_sum_fractional_cells():
    path = simulate(CHAIN, 10, seed=6)
    region = IntervalUnion(((0.5, 1.5),))
    expected = 0.5 * path.values[0] + 0.5 * path.values[1]
    assert interval_sum(path, region) == pytest.approx(expected, rel=1e-12)


def test_interval_sum_block_additivity():
    n = 1024
    plan = choose_mdp_blocking(n, float(n) ** -0.3)
    path = simulate(CHAIN, n, seed=8)
    total = sum(interval_sum(path, b) for b in plan.blocks)
    total += interval_sum(path, plan.remainder)
    assert total == pytest.approx(path.values.sum(), abs=1e-10)


def test_interval_sum_escaping_region_raises():
    path = simulate(CHAIN, 10, seed=6)
    with pytest.raises(ValueError, match="escapes"):
        interval_sum(path, IntervalUnion(((5.0, 11.0),)))


def test_wilson_interval_basic():
    lo, hi = wilson_interval(50, 100, 0.99)
    assert lo < 0.5 < hi
    assert (lo, hi) == pytest.approx((0.3772, 0.6228), abs=5e-4)


def test_mc_tail_trivial_levels():
    est = mc_tail(CHAIN, 16, 0.0, 200, seed=1)
    assert est.p_hat == 1.0
    est = mc_tail(CHAIN, 16, 17.0, 200, seed=1)  # beyond n M
    assert est.p_hat == 0.0


def test_mc_tail_matches_enumeration():
    est = mc_tail(rademacher(), 4, 4.0, 50_000, seed=77)
    assert est.ci_low <= 0.125 <= est.ci_high
    assert est.p_hat == pytest.approx(0.125, abs=0.01)


def test_mc_tail_reps_guard():
    with pytest.raises(ValueError):
        mc_tail(CHAIN, 8, 1.0, 50, seed=0)


def test_mc_tail_deterministic_and_chunk_invariant():
    a = mc_tail(CHAIN, 32, 4.0, 10_000, seed=5)
    b = mc_tail(CHAIN, 32, 4.0, 10_000, seed=5)
    assert a.p_hat == b.p_hat


def test_exact_tail_rademacher_pin():
    assert exact_tail_small(rademacher(), 4, 4.0) == pytest.approx(0.125, rel=1e-14)


def test_exact_tail_chain_pin():
    assert exact_tail_small(CHAIN, 2, 2.0) == pytest.approx(0.7, rel=1e-14)


def test_exact_tail_at_zero():
    assert exact_tail_small(CHAIN, 5, 0.0) == 1.0
    assert exact_tail_small(rademacher(), 5, -1.0) == 1.0


def test_exact_tail_budget():
    with pytest.raises(ValueError, match="budget"):
        exact_tail_small(CHAIN, 40, 1.0)
    with pytest.raises(ValueError, match="exact law"):
        exact_tail_small(uniform_centered(1.0), 4, 1.0)


def test_exact_tail_chain_vs_direct_enumeration():
    # independent oracle: enumerate all trajectories explicitly
    spec = two_state_chain(0.25, 0.55)
    n = 8
    states = [(s1, s2, s3) for s1 in (0, 1) for s2 in (0, 1) for s3 in (0, 1)]
    del states

    def brute(x):
        p, q = spec.p, spec.q
        pi_b = p / (p + q)
        total = 0.0
        for mask in range(2 ** n):
            bits = [(mask >> i) & 1 for i in range(n)]
            prob = pi_b if bits[0] else 1 - pi_b
            for prev, cur in zip(bits, bits[1:]):
                if prev:
                    prob *= (1 - q) if cur else q
                else:
                    prob *= p if cur else (1 - p)
            s = sum(spec.values[1] - spec.mean if b else spec.values[0] - spec.mean
                    for b in bits)
            if abs(s) >= x - 1e-12:
                total += prob
        return total

    for x in (0.5, 2.0, 4.0):
        assert exact_tail_small(spec, n, x) == pytest.approx(brute(x), rel=1e-12)


def test_mc_tail_within_ci_of_exact_small_chain():
    for n in (6, 10, 12):
        for factor in (0.5, 1.0, 1.5):
            x = factor * math.sqrt(n)
            exact = exact_tail_small(CHAIN, n, x)
            est = mc_tail(CHAIN, n, x, 40_000, seed=100 + n)
            assert est.ci_low - 1e-12 <= exact <= est.ci_high + 1e-12


@pytest.mark.parametrize("lag", range(1, 9))
def test_exact_alpha_dominated_by_profile(lag):
    exact = exact_alpha_two_state(0.3, 0.3, lag, window=2)
    c = CHAIN.profile.c_effective
    assert exact <= math.exp(-2 * c * lag) + 1e-12
    # single-coordinate events already give |lambda|^lag / 4
    assert exact >= 0.4 ** lag / 4 - 1e-12


def test_verify_ibragimov_independent_spec():
    # p = q = 1/2 makes the chain iid: exact factorization, alpha = 0
    spec = two_state_chain(0.5, 0.5)
    report = verify_ibragimov(spec, 4, [indicator(1, 1.0), indicator(3, -1.0)])
    assert report.alpha == pytest.approx(0.0, abs=1e-15)
    assert report.product_moment == pytest.approx(report.moment_product, abs=1e-15)
    assert report.ok


def test_verify_ibragimov_constant_functionals():
    report = verify_ibragimov(CHAIN, 3, [lambda v: np.ones(len(v))] * 3)
    assert report.product_moment == pytest.approx(1.0)
    assert report.moment_product == pytest.approx(1.0)
    assert report.slack == pytest.approx(report.budget)
    assert report.ok


def test_verify_ibragimov_chain_pair():
    report = verify_ibragimov(CHAIN, 4, [indicator(1, 1.0), indicator(2, 1.0)])
    # E Z1 Z2 = P(X1 = X2 = +1) = 0.35, E Z1 E Z2 = 0.25
    assert report.product_moment == pytest.approx(0.35, rel=1e-12)
    assert report.moment_product == pytest.approx(0.25, rel=1e-12)
    assert report.ok


def test_ibragimov_sweep_small():
    result = ibragimov_indicator_sweep(CHAIN, 6, max_p=3)
    assert result["violations"] == 0
    assert result["checked"] == 220
    assert result["worst_slack"] >= -1e-12


def test_arcones_check_empirical_matrix():
    rng = np.random.default_rng(0)
    blocks = rng.choice([-1.0, 1.0], size=(4000, 8)).cumsum(axis=1)
    report = arcones_check(blocks, sigma_n=1.0, a_n=0.01, eps=1e9)
    assert report.lindeberg_sum == 0.0  # threshold far above the support
    assert report.sup_over_sqrt_a > 0


def test_arcones_check_exact_rademacher_block():
    # block of length L: second moment L, sup L
    L = 5
    values = np.arange(-L, L + 1, 2, dtype=float)
    probs = np.array([math.comb(L, k) for k in range(L + 1)]) / 2 ** L
    report = arcones_check([(values, probs)], sigma_n=1.0, a_n=0.25, eps=1e9)
    assert report.second_moment_sum == pytest.approx(L, rel=1e-12)
    assert report.sup_over_sqrt_a == pytest.approx(L / 0.5, rel=1e-12)
    assert report.lindeberg_sum == 0.0


def test_arcones_check_lindeberg_activates():
    values = np.array([-2.0, 0.0, 2.0])
    probs = np.array([0.25, 0.5, 0.25])
    report = arcones_check([(values, probs)], sigma_n=1.0, a_n=1.0, eps=1.0)
    # mass beyond the threshold 1.0: both end points
    assert report.lindeberg_sum == pytest.approx(2 * 0.25 * 4.0)


def test_arcones_check_degenerate_blocks():
    report = arcones_check([(np.zeros(1), np.ones(1))] * 3, sigma_n=1.0,
                           a_n=0.1, eps=1.0)
    assert report.second_moment_sum == 0.0
    assert report.sup_over_sqrt_a == 0.0
    assert report.lindeberg_sum == 0.0
