"""Moderate-deviation diagnostics: speed conditions, empirical rates, block variances.

The deviation asymptotics are limits; nothing here declares them true or
false.  The functions emit the exact arithmetic of the speed conditions and
convergence diagnostics against the quadratic rate target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cantor import BlockPlan, IntervalUnion
from .processes import (McTailEstimate, ProcessSpec, cell_weights, chain_covariance,
                        exact_tail_small, generator, mc_tail, _paths)


@dataclass(frozen=True)
class RateFunction:
    """Quadratic rate t^2 / (2 sigma^2); sigma^2 = 1 is the normalized form."""

    sigma2: float = 1.0

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma^2 must be positive")

    def __call__(self, t: float) -> float:
        return t * t / (2.0 * self.sigma2)

    @classmethod
    def half_square(cls) -> "RateFunction":
        return cls(sigma2=1.0)

    @classmethod
    def scaled(cls, sigma2: float) -> "RateFunction":
        return cls(sigma2=sigma2)


@dataclass(frozen=True)
class SpeedDiagnostic:
    value: float
    passed: bool
    detail: dict

    def to_json(self) -> dict:
        return {"value": self.value, "passed": self.passed, "detail": self.detail}


def speed_condition_ok(n: int, a_n: float, threshold: float = 1.0) -> SpeedDiagnostic:
    """Ratio n a_n / (log^2 n (loglog n)^2) with a pass flag at the threshold."""
    if n < 16:
        raise ValueError("speed diagnostics need n >= 16")
    log_n = math.log(n)
    value = n * a_n / (log_n ** 2 * math.log(log_n) ** 2)
    passed = value >= threshold and a_n < 1.0
    return SpeedDiagnostic(value=value, passed=passed,
                           detail={"n": n, "a_n": a_n, "threshold": threshold})


def speed_condition_triangular(n: int, a_n: float, M_n: float,
                               threshold: float = 1.0) -> SpeedDiagnostic:
    """Ratio n a_n / (M_n^2 log^4 n), plus the M_n vs sqrt(n) proxy."""
    if n < 16:
        raise ValueError("speed diagnostics need n >= 16")
    if M_n <= 0:
        raise ValueError("row bound M_n must be positive")
    value = n * a_n / (M_n ** 2 * math.log(n) ** 4)
    bound_ratio = M_n / math.sqrt(n)
    passed = value >= threshold and a_n < 1.0 and bound_ratio < 1.0
    return SpeedDiagnostic(value=value, passed=passed,
                           detail={"n": n, "a_n": a_n, "M_n": M_n,
                                   "threshold": threshold,
                                   "M_over_sqrt_n": bound_ratio})


def sigma_ratio(spec: ProcessSpec, n: int, reps: int = 256, seed: int = 0) -> float:
    """Var(S_n) / n, in closed form where the covariances are known.

    Chains and iid specs use exact covariance sums
    Var(S_n) = n gamma_0 + 2 sum_{k<n} (n-k) gamma_k; other specs estimate by
    simulation.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if spec.kind in ("two_state_chain", "rademacher", "uniform"):
        gamma0 = chain_covariance(spec, 0)
        if spec.kind != "two_state_chain" or n == 1:
            return gamma0
        lam = spec.profile.lambda2
        k = np.arange(1, n)
        tail = np.sum((n - k) * gamma0 * lam ** k)
        return float((n * gamma0 + 2.0 * tail) / n)
    sums = _paths(spec, n, reps, generator(seed)).sum(axis=1)
    return float(np.var(sums) / n)


@dataclass
class MdpExperiment:
    """Grid description for empirical moderate-deviation rates."""

    spec: ProcessSpec
    n_grid: Sequence[int]
    a_rule: Callable[[int], float]
    t_grid: Sequence[float]
    method: str = "exact"
    reps: int = 100_000
    seed: int = 0
    event: str = "one_sided"
    estimates: list = field(default_factory=list)


@dataclass(frozen=True)
class MdpPoint:
    n: int
    t: float
    a_n: float
    p: float
    estimate: float
    target: float
    gap: float
    method: str
    note: str = ""

    def to_json(self) -> dict:
        return {"n": self.n, "t": self.t, "a_n": self.a_n, "p": self.p,
                "estimate": self.estimate, "target": self.target,
                "gap": self.gap, "method": self.method, "note": self.note}


def _sigma_n(spec: ProcessSpec, n: int) -> float:
    if spec.kind == "rademacher":
        return math.sqrt(n)
    return math.sqrt(n * sigma_ratio(spec, n))


def empirical_rate(experiment: MdpExperiment) -> list[MdpPoint]:
    """Fill a_n log P(S_n / sigma_n >= t / sqrt(a_n)) over the grid.

    Exact mode uses binomial tails (Rademacher) or chain enumeration; Monte
    Carlo mode records the Wilson interval and flags empty tallies with a
    -inf sentinel.  Estimates are compared against the quadratic target
    -t^2/2.
    """
    rate = RateFunction.half_square()
    rows: list[MdpPoint] = []
    one_sided = experiment.event == "one_sided"
    for n in experiment.n_grid:
        a_n = experiment.a_rule(n)
        sig = _sigma_n(experiment.spec, n)
        for t in experiment.t_grid:
            x = t * sig / math.sqrt(a_n)
            note = ""
            if experiment.method == "exact":
                p = exact_tail_small(experiment.spec, n, x, max_n=24,
                                     one_sided=one_sided)
            elif experiment.method == "monte_carlo":
                est = mc_tail(experiment.spec, n, x, experiment.reps,
                              experiment.seed, one_sided=one_sided)
                p = est.p_hat
                note = f"wilson99=[{est.ci_low:.3g},{est.ci_high:.3g}]"
            else:
                raise ValueError(f"unknown method {experiment.method!r}")
            estimate = a_n * math.log(p) if p > 0 else -math.inf
            if p == 0:
                note = (note + " " if note else "") + "empty tally"
            target = -rate(t)
            rows.append(MdpPoint(n=n, t=t, a_n=a_n, p=p, estimate=estimate,
                                 target=target, gap=estimate - target,
                                 method=experiment.method, note=note))
    experiment.estimates = rows
    return rows


@dataclass(frozen=True)
class BlockVarianceReport:
    ratio: float
    total_var: float
    sum_block_vars: float
    cross_sum: float
    min_gap: float
    method: str

    def to_json(self) -> dict:
        return {"ratio": self.ratio, "total_var": self.total_var,
                "sum_block_vars": self.sum_block_vars,
                "cross_sum": self.cross_sum, "min_gap": self.min_gap,
                "method": self.method}


def _lag_products(weights: np.ndarray, offsets: np.ndarray, k_max: int) -> np.ndarray:
    """sum_i w_i w_j over pairs at each lag 1..k_max, given cell offsets."""
    span = offsets.max() - offsets.min() + 1
    dense = np.zeros(span)
    np.add.at(dense, offsets - offsets.min(), weights)
    out = np.zeros(k_max + 1)
    out[0] = float(np.dot(dense, dense))
    for k in range(1, min(k_max, span - 1) + 1):
        out[k] = float(np.dot(dense[:-k], dense[k:]))
    return out


def variance_ratio_for_blocks(spec: ProcessSpec, blocks: Sequence[IntervalUnion],
                              n: int, min_gap: float = math.nan,
                              reps: int = 4096, seed: int = 0,
                              method: str = "auto") -> BlockVarianceReport:
    """Var(sum of block sums) over sum of block variances.

    Exact for chain and iid specs through the lag structure of the unit-cell
    weights; Monte Carlo otherwise (or on request).
    """
    if method == "auto":
        method = "exact" if spec.kind in ("two_state_chain", "rademacher",
                                          "uniform") else "mc"
    if method == "exact":
        gamma0 = chain_covariance(spec, 0)
        lam = spec.profile.lambda2 if spec.kind == "two_state_chain" else 0.0
        if lam:
            k_max = min(n, max(1, math.ceil(math.log(1e-18) / math.log(abs(lam)))))
            gammas = gamma0 * np.asarray(lam, dtype=float) ** np.arange(k_max + 1)
        else:
            k_max = 0
            gammas = np.array([gamma0])

        def quad_form(idx: np.ndarray, w: np.ndarray) -> float:
            prods = _lag_products(w, idx, k_max)
            upto = min(len(prods), len(gammas))
            return float(gammas[0] * prods[0]
                         + 2.0 * np.dot(gammas[1:upto], prods[1:upto]))

        block_vars = []
        all_idx, all_w = [], []
        for b in blocks:
            idx, w = cell_weights(b, n)
            block_vars.append(quad_form(idx, w))
            all_idx.append(idx)
            all_w.append(w)
        total = quad_form(np.concatenate(all_idx), np.concatenate(all_w))
        sum_vars = math.fsum(block_vars)
    else:
        rng = generator(seed)
        weights = np.zeros((n, len(blocks)))
        for j, b in enumerate(blocks):
            idx, w = cell_weights(b, n)
            weights[idx - 1, j] = w
        paths = _paths(spec, n, reps, rng)
        block_sums = paths @ weights
        block_vars = np.var(block_sums, axis=0, ddof=1)
        total = float(np.var(block_sums.sum(axis=1), ddof=1))
        sum_vars = float(block_vars.sum())
    return BlockVarianceReport(ratio=total / sum_vars, total_var=total,
                               sum_block_vars=sum_vars,
                               cross_sum=total - sum_vars,
                               min_gap=min_gap, method=method)


def block_variance_ratio(spec: ProcessSpec, plan: BlockPlan, reps: int = 4096,
                         seed: int = 0, method: str = "auto") -> BlockVarianceReport:
    """Variance-equivalence diagnostic for a block plan; tends to 1 as gaps grow."""
    return variance_ratio_for_blocks(spec, plan.blocks, plan.n,
                                     min_gap=plan.min_gap, reps=reps,
                                     seed=seed, method=method)
