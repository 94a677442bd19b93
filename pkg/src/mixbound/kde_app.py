"""Kernel density estimation for a mean-reverting diffusion, with rate diagnostics.

The simulated process is the stationary mean-reverting Gaussian diffusion,
sampled through its exact transition law (no discretization bias in the
marginals).  The pair-density defect integral that drives the deviation rate
has a closed-form integrand and is evaluated by adaptive quadrature with a
dyadic split around the short-time singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal

from .processes import generator


@dataclass(frozen=True)
class DiffusionSpec:
    """Mean-reverting Gaussian diffusion: dX = -theta X dt + sigma_d dW.

    The stationary law is centered normal with variance sigma_d^2 / (2 theta).
    The process mixes geometrically; the rate used in speed checks is theta,
    taken as given.
    """

    theta: float
    sigma_d: float
    dt: float = 0.01
    T: float = 100.0

    def __post_init__(self):
        if self.theta <= 0 or self.sigma_d <= 0:
            raise ValueError("theta and sigma_d must be positive")
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("dt and T must be positive")

    @property
    def stationary_var(self) -> float:
        return self.sigma_d ** 2 / (2.0 * self.theta)

    @property
    def mixing_rate(self) -> float:
        return self.theta


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric density kernel with finite second moment."""

    name: str

    def pdf(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.name == "gaussian":
            return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        if self.name == "epanechnikov":
            return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
        if self.name == "triangular":
            return np.clip(1.0 - np.abs(u), 0.0, None)
        raise ValueError(f"unknown kernel {self.name!r}")

    @property
    def second_moment(self) -> float:
        return {"gaussian": 1.0, "epanechnikov": 0.2, "triangular": 1.0 / 6.0}[self.name]


GAUSSIAN = KernelSpec("gaussian")
EPANECHNIKOV = KernelSpec("epanechnikov")
TRIANGULAR = KernelSpec("triangular")


def get_kernel(name: str) -> KernelSpec:
    kernel = KernelSpec(name)
    kernel.pdf(0.0)  # validates the name
    return kernel


@dataclass
class OuPath:
    """Discretized diffusion path on the grid 0, dt, 2dt, ..., T."""

    times: np.ndarray
    values: np.ndarray
    spec: DiffusionSpec
    seed_record: dict


def simulate_ou(spec: DiffusionSpec, seed: int, stream: tuple[int, ...] = ()) -> OuPath:
    """Stationary start, exact Gaussian transitions between grid points."""
    n_steps = int(round(spec.T / spec.dt))
    times = np.arange(n_steps + 1) * spec.dt
    rho = math.exp(-spec.theta * spec.dt)
    innov_sd = math.sqrt(spec.stationary_var * (1.0 - rho * rho))
    rng = generator(seed, *stream)
    z = rng.standard_normal(n_steps + 1)
    z[0] *= math.sqrt(spec.stationary_var)
    z[1:] *= innov_sd
    values = signal.lfilter([1.0], [1.0, -rho], z)
    return OuPath(times=times, values=values, spec=spec,
                  seed_record={"seed": seed, "stream": list(stream)})


@dataclass(frozen=True)
class KdeEstimate:
    x: float
    h_T: float
    f_hat: float
    T: float
    meta: dict

    def to_json(self) -> dict:
        return {"x": self.x, "h_T": self.h_T, "f_hat": self.f_hat, "T": self.T,
                "meta": dict(self.meta)}


def kde(path: OuPath, x: float, h_T: float, kernel: KernelSpec = GAUSSIAN) -> KdeEstimate:
    """Time-averaged kernel density estimate at x with bandwidth h_T.

    f_hat = (1 / (T h)) * integral_0^T K((x - X_t) / h) dt, trapezoid rule on
    the simulation grid.
    """
    if h_T <= 0:
        raise ValueError("bandwidth must be positive")
    T = path.spec.T
    if T < 1:
        raise ValueError("horizon must be at least 1")
    integrand = kernel.pdf((x - path.values) / h_T)
    total = float(np.trapezoid(integrand, dx=path.spec.dt))
    return KdeEstimate(x=x, h_T=h_T, f_hat=total / (T * h_T), T=T,
                       meta={"dt": path.spec.dt, "kernel": kernel.name,
                             "seed": path.seed_record})


def block_mean_calibration(spec: DiffusionSpec, x: float, h_T: float,
                           kernel: KernelSpec, seed: int, multiple: int = 10) -> float:
    """Per-block centering constant from an independent long run.

    Estimates delta * E K((x - X) / h) by time-averaging over a path
    ``multiple`` times the horizon; the calibration stream never collides
    with replica streams.
    """
    n = int(math.floor(spec.T))
    delta = spec.T / n
    long_spec = DiffusionSpec(theta=spec.theta, sigma_d=spec.sigma_d,
                              dt=spec.dt, T=spec.T * multiple)
    path = simulate_ou(long_spec, seed, stream=(2**31,))
    integrand = kernel.pdf((x - path.values) / h_T)
    mean_k = float(np.trapezoid(integrand, dx=spec.dt)) / long_spec.T
    return delta * mean_k


@dataclass
class BlockArray:
    """Centered block-integral array with the algebraic sum identity.

    values[i] = (block integral of K((x - X)/h) minus its centering constant)
    scaled by 1 / (sqrt(delta) h).  By construction
    sum(values) * sqrt(delta) = T * (f_hat - mean_fhat), so the two sides
    agree exactly when T is an integer (delta = 1).
    """

    values: np.ndarray
    n: int
    delta: float
    f_hat: float
    mean_fhat: float
    block_mean: float


def discretize_array(path: OuPath, x: float, h_T: float,
                     kernel: KernelSpec = GAUSSIAN,
                     block_mean: float | None = None) -> BlockArray:
    """Split [0, T] into n = floor(T) blocks of length delta = T/n in [1, 2).

    Block integrals use the trapezoid rule with interpolated block-boundary
    points, so they add up exactly to the full-path integral.  The centering
    constant defaults to an independent calibration run.
    """
    T = path.spec.T
    if T < 1:
        raise ValueError("horizon must be at least 1")
    n = int(math.floor(T))
    delta = T / n
    if block_mean is None:
        block_mean = block_mean_calibration(path.spec, x, h_T, kernel,
                                            path.seed_record["seed"],
                                            multiple=10)
    dt = path.spec.dt
    k_values = kernel.pdf((x - path.values) / h_T)
    # trapezoid antiderivative on the grid, then exact linear interpolation
    cum = np.concatenate([[0.0], np.cumsum((k_values[1:] + k_values[:-1]) * 0.5 * dt)])
    bounds = np.arange(n + 1) * delta

    def antider(t: np.ndarray) -> np.ndarray:
        pos = t / dt
        i = np.minimum(pos.astype(int), len(cum) - 2)
        frac = pos - i
        left = k_values[i]
        right = k_values[np.minimum(i + 1, len(k_values) - 1)]
        k_at = left + (right - left) * np.clip(frac, 0.0, 1.0)
        return cum[i] + 0.5 * (left + k_at) * (t - i * dt)

    block_integrals = np.diff(antider(bounds))
    values = (block_integrals - block_mean) / (math.sqrt(delta) * h_T)
    f_hat = float(block_integrals.sum()) / (T * h_T)
    mean_fhat = n * block_mean / (T * h_T)
    return BlockArray(values=values, n=n, delta=delta, f_hat=f_hat,
                      mean_fhat=mean_fhat, block_mean=block_mean)


@dataclass(frozen=True)
class PairDensityIntegral:
    """Value of the integrated pair-density defect at a point, with quad error."""

    x: float
    value: float
    error: float

    def to_json(self) -> dict:
        return {"x": self.x, "value": self.value, "error": self.error}


def g_integral_ou(theta: float, sigma_d: float, x: float,
                  rtol: float = 1e-10) -> PairDensityIntegral:
    """Integral over u > 0 of the pair-density defect g_u(x, x).

    For the mean-reverting Gaussian diffusion the defect is the bivariate
    normal density at (x, x) with correlation exp(-theta u) minus the squared
    marginal.  The 1/sqrt(1 - rho^2) singularity at u = 0 is integrable; the
    quadrature splits dyadically toward 0 until segments stop contributing.
    """
    if theta <= 0 or sigma_d <= 0:
        raise ValueError("theta and sigma_d must be positive")
    s2 = sigma_d ** 2 / (2.0 * theta)
    marginal2 = math.exp(-x * x / s2) / (2.0 * math.pi * s2)

    def defect(u: float) -> float:
        rho = math.exp(-theta * u)
        one_m = -math.expm1(-2.0 * theta * u)  # 1 - rho^2, accurate near 0
        return (math.exp(-x * x / (s2 * (1.0 + rho))) / (2.0 * math.pi * s2 * math.sqrt(one_m))
                - marginal2)

    total = 0.0
    err = 0.0
    v, e = integrate.quad(defect, 1.0, np.inf, epsabs=0.0, epsrel=rtol, limit=200)
    total += v
    err += e
    hi = 1.0
    for _ in range(80):
        lo = hi / 2.0
        v, e = integrate.quad(defect, lo, hi, epsabs=0.0, epsrel=rtol, limit=200)
        total += v
        err += e
        hi = lo
        if abs(v) < rtol * max(abs(total), 1e-300) and hi < 1e-6:
            break
    else:
        raise RuntimeError(f"quadrature did not converge; residual segment {v}")
    # remaining sliver (0, hi): integrand ~ 1/sqrt(u), bound the leftover
    tail_bound = abs(defect(hi)) * math.sqrt(hi) * 2.0 * math.sqrt(hi)
    err += tail_bound
    return PairDensityIntegral(x=x, value=total, error=err)


def kde_rate_function(integral: PairDensityIntegral, t: float,
                      reading: str = "mdp") -> float:
    """Deviation rate for the centered estimator.

    The default "mdp" reading returns t^2 / (4 * integral), the quadratic rate
    t^2/(2 s^2) with asymptotic variance s^2 = 2 * integral.  The "literal"
    reading multiplies instead (t^2 * 4 * integral); see the README for why
    both exist.
    """
    if integral.value <= 0:
        raise ValueError("pair-density integral must be positive")
    if reading == "mdp":
        return t * t / (4.0 * integral.value)
    if reading == "literal":
        return t * t * 4.0 * integral.value
    raise ValueError(f"unknown reading {reading!r}")


@dataclass(frozen=True)
class BiasReport:
    h_grid: tuple[float, ...]
    biases: tuple[float, ...]
    slope: float
    reps: int
    seed: int

    def to_json(self) -> dict:
        return {"h_grid": list(self.h_grid), "biases": list(self.biases),
                "slope": self.slope, "reps": self.reps, "seed": self.seed}


def stationary_density(spec: DiffusionSpec, x: float) -> float:
    s2 = spec.stationary_var
    return math.exp(-x * x / (2.0 * s2)) / math.sqrt(2.0 * math.pi * s2)


def mean_kde(spec: DiffusionSpec, x: float, h_grid, kernel: KernelSpec,
             reps: int, seed: int) -> np.ndarray:
    """Monte Carlo mean of the density estimate for each bandwidth.

    Replicas share paths across bandwidths (common random numbers), one
    replica stream per path.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    sums = np.zeros(len(h_grid))
    for r in range(reps):
        path = simulate_ou(spec, seed, stream=(r,))
        for j, h in enumerate(h_grid):
            sums[j] += kde(path, x, float(h), kernel).f_hat
    return sums / reps


def bias_check(spec: DiffusionSpec, x: float, h_grid, kernel: KernelSpec,
               reps: int, seed: int) -> BiasReport:
    """Estimate |E f_hat - f(x)| across bandwidths and fit the log-log slope.

    Quadratic smoothing bias makes the expected slope 2 for symmetric kernels.
    """
    f_true = stationary_density(spec, x)
    means = mean_kde(spec, x, h_grid, kernel, reps, seed)
    biases = np.abs(means - f_true)
    slope = float(np.polyfit(np.log(np.asarray(h_grid, float)),
                             np.log(np.maximum(biases, 1e-300)), 1)[0])
    return BiasReport(h_grid=tuple(float(h) for h in h_grid),
                      biases=tuple(float(b) for b in biases),
                      slope=slope, reps=reps, seed=seed)


@dataclass(frozen=True)
class KdeSpeedDiagnostic:
    variance_term: float
    bias_term: float
    floor_ratio: float
    passed: bool

    def to_json(self) -> dict:
        return {"variance_term": self.variance_term, "bias_term": self.bias_term,
                "floor_ratio": self.floor_ratio, "passed": self.passed}


def kde_speed_check(T: float, h_T: float, a_rule, threshold: float = 1.0,
                    bias_cap: float = 1.0) -> KdeSpeedDiagnostic:
    """Arithmetic checks of the deviation-speed conditions for the estimator.

    variance_term = a_T T h_T^2 / log^4 T (wants to grow), bias_term =
    a_T T h_T^4 (wants to vanish), floor_ratio = a_floor(T) / a_T (wants 1).
    """
    if T < 16:
        raise ValueError("speed diagnostics need T >= 16")
    a_T = a_rule(T)
    a_floor = a_rule(float(math.floor(T)))
    variance_term = a_T * T * h_T ** 2 / math.log(T) ** 4
    bias_term = a_T * T * h_T ** 4
    floor_ratio = a_floor / a_T
    passed = (variance_term >= threshold and bias_term <= bias_cap
              and a_T < 1.0)
    return KdeSpeedDiagnostic(variance_term=variance_term, bias_term=bias_term,
                              floor_ratio=floor_ratio, passed=passed)
