import math

import numpy as np
import pytest

from mixbound import (DiffusionSpec, bias_check, discretize_array,
                      g_integral_ou, get_kernel, kde, kde_rate_function,
                      kde_speed_check, simulate_ou)
from mixbound.kde_app import (EPANECHNIKOV, GAUSSIAN, TRIANGULAR,
                              block_mean_calibration, stationary_density)

OU_UNIT = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.01, T=200.0)


@pytest.mark.parametrize("kernel", [GAUSSIAN, EPANECHNIKOV, TRIANGULAR])
def test_kernels_are_symmetric_densities(kernel):
    u = np.linspace(-6, 6, 4001)
    pdf = kernel.pdf(u)
    assert np.all(pdf >= 0)
    assert np.trapezoid(pdf, u) == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(pdf, kernel.pdf(-u))
    second = np.trapezoid(u * u * pdf, u)
    assert second == pytest.approx(kernel.second_moment, abs=1e-4)


def test_get_kernel_validates():
    assert get_kernel("gaussian").name == "gaussian"
    with pytest.raises(ValueError):
        get_kernel("box")


def test_diffusion_spec_stationary_var():
    assert OU_UNIT.stationary_var == pytest.approx(1.0)
    with pytest.raises(ValueError):
        DiffusionSpec(theta=0.0, sigma_d=1.0)


def test_simulate_ou_deterministic():
    a = simulate_ou(OU_UNIT, seed=3).values
    b = simulate_ou(OU_UNIT, seed=3).values
    assert np.array_equal(a, b)


def test_simulate_ou_stationary_moments():
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.05, T=4000.0)
    path = simulate_ou(spec, seed=7)
    assert np.var(path.values) == pytest.approx(1.0, abs=0.05)
    assert np.mean(path.values) == pytest.approx(0.0, abs=0.05)


def test_simulate_ou_lag_correlation():
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.5, T=20000.0)
    v = simulate_ou(spec, seed=8).values
    r = np.corrcoef(v[:-1], v[1:])[0, 1]
    assert r == pytest.approx(math.exp(-0.5), abs=0.02)


def test_kde_positive_for_gaussian_kernel():
    path = simulate_ou(OU_UNIT, seed=1)
    assert kde(path, 3.0, 0.2).f_hat > 0.0


def test_kde_constant_path_pin():
    path = simulate_ou(OU_UNIT, seed=1)
    path.values = np.zeros_like(path.values)
    est = kde(path, 0.0, 0.2)
    assert est.f_hat == pytest.approx(float(GAUSSIAN.pdf(0.0)) / 0.2, rel=1e-12)


def test_kde_requires_positive_bandwidth():
    path = simulate_ou(OU_UNIT, seed=1)
    with pytest.raises(ValueError):
        kde(path, 0.0, 0.0)


def test_kde_integrates_to_one_over_grid():
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.01, T=2000.0)
    path = simulate_ou(spec, seed=21)
    xs = np.linspace(-5.0, 5.0, 81)
    f = [kde(path, float(x), 0.2).f_hat for x in xs]
    assert np.trapezoid(f, xs) == pytest.approx(1.0, abs=0.02)


def test_discretize_array_identity_integer_horizon():
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.01, T=50.0)
    path = simulate_ou(spec, seed=5)
    arr = discretize_array(path, 0.0, 0.2)
    assert arr.delta == 1.0
    lhs = arr.values.sum()
    rhs = spec.T * (arr.f_hat - arr.mean_fhat)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_discretize_array_identity_fractional_horizon():
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.01, T=53.5)
    path = simulate_ou(spec, seed=5)
    arr = discretize_array(path, 0.0, 0.2)
    assert 1.0 <= arr.delta < 2.0
    assert arr.n == 53
    lhs = arr.values.sum() * math.sqrt(arr.delta)
    rhs = spec.T * (arr.f_hat - arr.mean_fhat)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_discretize_array_blocks_recover_full_integral():
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.01, T=64.0)
    path = simulate_ou(spec, seed=15)
    arr = discretize_array(path, 0.0, 0.25)
    direct = kde(path, 0.0, 0.25).f_hat
    assert arr.f_hat == pytest.approx(direct, rel=1e-10)


def test_discretize_array_zero_path_exact_centering():
    path = simulate_ou(OU_UNIT, seed=5)
    path.values = np.zeros_like(path.values)
    k0 = float(GAUSSIAN.pdf(0.0))
    arr = discretize_array(path, 0.0, 0.2, block_mean=k0)
    assert np.max(np.abs(arr.values)) < 1e-12


def test_block_mean_calibration_close_to_exact():
    # gaussian kernel and normal marginal: E K_h((x - X)/h)/h is the
    # variance-inflated normal density
    h = 0.2
    exact = math.exp(0.0) / math.sqrt(2 * math.pi * (1 + h * h))
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.01, T=500.0)
    m = block_mean_calibration(spec, 0.0, h, GAUSSIAN, seed=9)
    assert m / h == pytest.approx(exact, abs=0.01)


def test_g_integral_pin_at_origin():
    # closed form log(2)/(2 pi) for unit stationary variance and unit rate
    gi = g_integral_ou(1.0, math.sqrt(2.0), 0.0)
    assert gi.value == pytest.approx(math.log(2.0) / (2.0 * math.pi), rel=1e-8)
    assert gi.error < 1e-9


def test_g_integral_partial_series_oracle():
    # independent oracle: sum_k C(2k, k) / (4^k 2k) built from the expansion
    # of the inverse square root
    total = 0.0
    for k in range(1, 4000):
        total += math.comb(2 * k, k) / (4.0 ** k * 2 * k)
    series_value = total / (2 * math.pi)
    gi = g_integral_ou(1.0, math.sqrt(2.0), 0.0)
    assert gi.value == pytest.approx(series_value, abs=2e-4)


def test_g_integral_theta_scaling():
    base = g_integral_ou(1.0, math.sqrt(2.0), 0.0).value
    halved = g_integral_ou(2.0, 2.0, 0.0).value  # same stationary variance
    assert halved == pytest.approx(base / 2.0, rel=1e-8)


def test_g_integral_decreases_in_x():
    values = [g_integral_ou(1.0, math.sqrt(2.0), x).value for x in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-3
    assert values[0] > 0


def test_kde_rate_function_readings():
    gi = g_integral_ou(1.0, math.sqrt(2.0), 0.0)
    assert kde_rate_function(gi, 0.0) == 0.0
    assert kde_rate_function(gi, 2.0) == pytest.approx(4 * kde_rate_function(gi, 1.0))
    # generic quadratic rate with asymptotic variance 2 * integral
    s2 = 2.0 * gi.value
    assert kde_rate_function(gi, 1.5) == pytest.approx(1.5 ** 2 / (2 * s2), rel=1e-12)
    assert kde_rate_function(gi, 1.0, reading="literal") == pytest.approx(4 * gi.value)


def test_kde_rate_function_rejects_nonpositive():
    from mixbound import PairDensityIntegral
    with pytest.raises(ValueError):
        kde_rate_function(PairDensityIntegral(0.0, 0.0, 0.0), 1.0)


def test_bias_check_slope_small_run():
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.02, T=500.0)
    report = bias_check(spec, 0.0, [0.6, 0.4, 0.25], GAUSSIAN, reps=120, seed=13)
    assert 1.5 <= report.slope <= 2.5


def test_bias_large_bandwidth_oversmooths():
    spec = DiffusionSpec(theta=1.0, sigma_d=math.sqrt(2.0), dt=0.02, T=400.0)
    report = bias_check(spec, 0.0, [2.0], GAUSSIAN, reps=60, seed=3)
    f0 = stationary_density(spec, 0.0)
    smoothed = 1.0 / math.sqrt(2 * math.pi * (1 + 4.0))
    assert report.biases[0] == pytest.approx(f0 - smoothed, abs=0.01)
    assert report.biases[0] > 0.1


def test_kde_speed_check_values():
    a_rule = lambda T: float(T) ** -0.25
    diag = kde_speed_check(10_000.0, 0.2, a_rule)
    expected = a_rule(10_000.0) * 10_000.0 * 0.04 / math.log(10_000.0) ** 4
    assert diag.variance_term == pytest.approx(expected, rel=1e-14)
    assert diag.bias_term == pytest.approx(a_rule(10_000.0) * 10_000.0 * 0.2 ** 4, rel=1e-14)
    assert diag.floor_ratio == 1.0


def test_kde_speed_check_flags():
    assert not kde_speed_check(100.0, 0.001, lambda T: 0.5).passed   # variance term tiny
    assert not kde_speed_check(10_000.0, 0.9, lambda T: 0.5).passed  # bias term large
