"""Simulation of bounded mixing sequences and exact small-instance oracles.

Sample paths are centered at their exact stationary mean.  Randomness comes
from the counter-based Philox generator; replica streams derive from the base
seed through fixed-size chunk keys, so results are reproducible across
platforms and independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable, Sequence

import numpy as np
from scipy import signal
from scipy.stats import binom, norm

from .cantor import IntervalUnion
from .mixing import MixingProfile, independent_profile, markov2_mixing

MC_CHUNK = 8192


def generator(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by the base seed plus a stream tuple."""
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence((seed,) + stream)))


@dataclass(frozen=True)
class ProcessSpec:
    """Bounded centered process description.

    Use the factory functions (:func:`two_state_chain`, :func:`rademacher`,
    :func:`uniform_centered`, :func:`bounded_ar1`) rather than constructing
    directly; they fill in the derived bound, stationary mean and profile.
    """

    kind: str
    M: float
    profile: MixingProfile
    p: float | None = None
    q: float | None = None
    values: tuple[float, float] | None = None
    phi: float | None = None
    width: float | None = None
    mean: float = 0.0
    var: float = 0.0

    def to_json(self) -> dict:
        out = {"kind": self.kind, "M": self.M}
        if self.kind == "two_state_chain":
            out.update(p=self.p, q=self.q, values=list(self.values))
        elif self.kind == "bounded_ar1":
            out.update(phi=self.phi, width=self.width)
        return out


def process_spec_from_json(doc: dict) -> ProcessSpec:
    kind = doc["kind"]
    if kind == "two_state_chain":
        return two_state_chain(doc["p"], doc["q"], tuple(doc.get("values", (-1.0, 1.0))))
    if kind == "rademacher":
        return rademacher()
    if kind == "uniform":
        return uniform_centered(doc.get("M", 1.0))
    if kind == "bounded_ar1":
        return bounded_ar1(doc["phi"], doc.get("width", 1.0))
    raise ValueError(f"unknown process kind {kind!r}")


def two_state_chain(p: float, q: float, values: tuple[float, float] = (-1.0, 1.0)) -> ProcessSpec:
    """Stationary two-state chain on ``values`` with switch probabilities p, q."""
    profile = markov2_mixing(p, q)
    a, b = float(values[0]), float(values[1])
    if a == b:
        raise ValueError("the two states must differ")
    pi_a = q / (p + q)
    pi_b = p / (p + q)
    mean = pi_a * a + pi_b * b
    var = p * q * (a - b) ** 2 / (p + q) ** 2
    M = max(abs(a - mean), abs(b - mean))
    return ProcessSpec(kind="two_state_chain", M=M, profile=profile, p=p, q=q,
                       values=(a, b), mean=mean, var=var)


def rademacher() -> ProcessSpec:
    return ProcessSpec(kind="rademacher", M=1.0, profile=independent_profile(), var=1.0)


def uniform_centered(M: float = 1.0) -> ProcessSpec:
    if M <= 0:
        raise ValueError("bound M must be positive")
    return ProcessSpec(kind="uniform", M=M, profile=independent_profile(),
                       var=M ** 2 / 3.0)


def bounded_ar1(phi: float, width: float = 1.0) -> ProcessSpec:
    """AR(1) with uniform innovations on [-width, width], bounded by width/(1-|phi|).

    The symmetric innovation law makes the stationary mean exactly zero.  The
    recorded geometric rate -log|phi|/2 is a modeling constant, not estimated.
    """
    if not -1.0 < phi < 1.0:
        raise ValueError("phi must lie in (-1, 1)")
    if width <= 0:
        raise ValueError("innovation width must be positive")
    M = width / (1.0 - abs(phi))
    if phi == 0.0:
        profile = independent_profile()
    else:
        profile = MixingProfile(kind="geometric", c=-math.log(abs(phi)) / 2.0,
                                lambda2=phi)
    var = (width ** 2 / 3.0) / (1.0 - phi ** 2)
    return ProcessSpec(kind="bounded_ar1", M=M, profile=profile, phi=phi,
                       width=width, var=var)


def chain_covariance(spec: ProcessSpec, k: int) -> float:
    """Exact stationary autocovariance at lag k for chain and iid specs."""
    if k == 0:
        return spec.var
    if spec.kind == "two_state_chain":
        return spec.var * spec.profile.lambda2 ** k
    if spec.kind in ("rademacher", "uniform"):
        return 0.0
    raise ValueError(f"no closed-form covariance for {spec.kind}")


@dataclass
class SamplePath:
    """Realized centered sequence X_1..X_n plus its seed record."""

    values: np.ndarray
    n: int
    spec: ProcessSpec
    seed_record: dict


def _chain_paths(spec: ProcessSpec, n: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Matrix of centered chain paths, stationary start.  Shape (reps, n)."""
    p, q = spec.p, spec.q
    a, b = spec.values
    pi_b = p / (p + q)
    state = rng.random(reps) < pi_b  # True means state b
    if n == 1:
        states = state[:, None]
    elif p == q:
        # switch probability is state-independent: cumulative parity of flips
        flips = (rng.random((reps, n - 1)) < p).astype(np.int8)
        parity = np.cumsum(flips, axis=1) & 1
        states = np.concatenate([state[:, None],
                                 state[:, None] ^ parity.astype(bool)], axis=1)
    else:
        u = rng.random((reps, n - 1))
        states = np.empty((reps, n), dtype=bool)
        states[:, 0] = state
        for j in range(1, n):
            prev = states[:, j - 1]
            switch = np.where(prev, u[:, j - 1] < q, u[:, j - 1] < p)
            states[:, j] = prev ^ switch
    return np.where(states, b, a) - spec.mean


def _paths(spec: ProcessSpec, n: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "two_state_chain":
        return _chain_paths(spec, n, reps, rng)
    if spec.kind == "rademacher":
        return rng.integers(0, 2, size=(reps, n)).astype(float) * 2.0 - 1.0
    if spec.kind == "uniform":
        return rng.uniform(-spec.M, spec.M, size=(reps, n))
    if spec.kind == "bounded_ar1":
        burn = math.ceil(10.0 / (1.0 - abs(spec.phi)))
        eps = rng.uniform(-spec.width, spec.width, size=(reps, n + burn))
        paths = signal.lfilter([1.0], [1.0, -spec.phi], eps, axis=1)
        return paths[:, burn:]
    raise ValueError(f"unknown process kind {spec.kind!r}")


def simulate(spec: ProcessSpec, n: int, seed: int) -> SamplePath:
    """Single centered path of length n, deterministic in (spec, n, seed)."""
    if n < 1:
        raise ValueError("path length must be positive")
    values = _paths(spec, n, 1, generator(seed))[0]
    return SamplePath(values=values, n=n, spec=spec,
                      seed_record={"seed": seed, "stream": []})


def cell_weights(region: IntervalUnion, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-cell overlap weights of a region inside (0, n].

    Cell k (1-based) is the interval (k-1, k], on which the embedded process
    equals X_k.  Returns (cell indices, weights).
    """
    idx_parts, w_parts = [], []
    for l, r in region.intervals:
        if l < -1e-9 or r > n + 1e-9:
            raise ValueError(f"region interval ({l}, {r}] escapes (0, {n}]")
        k0 = int(math.floor(l)) + 1
        k1 = int(math.ceil(r))
        cells = np.arange(k0, k1 + 1, dtype=int)
        w = np.minimum(float(r), cells) - np.maximum(float(l), cells - 1.0)
        keep = w > 1e-15
        idx_parts.append(cells[keep])
        w_parts.append(w[keep])
    if not idx_parts:
        return np.array([], dtype=int), np.array([])
    return np.concatenate(idx_parts), np.concatenate(w_parts)


def interval_sum(path: SamplePath, region: IntervalUnion) -> float:
    """Integral of the piecewise-constant embedding of the path over the region."""
    idx, w = cell_weights(region, path.n)
    return float(np.dot(w, path.values[idx - 1]))


def wilson_interval(count: int, total: int, confidence: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ValueError("need at least one trial")
    z = norm.ppf(0.5 + confidence / 2.0)
    phat = count / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class McTailEstimate:
    """Empirical tail probability with its Wilson confidence interval."""

    p_hat: float
    reps: int
    ci_low: float
    ci_high: float
    confidence: float
    seed_record: dict

    def to_json(self) -> dict:
        return {"p_hat": self.p_hat, "reps": self.reps, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "confidence": self.confidence,
                "seed": self.seed_record}


def mc_tail(spec: ProcessSpec, n: int, x: float, reps: int, seed: int,
            confidence: float = 0.99, one_sided: bool = False) -> McTailEstimate:
    """Monte Carlo estimate of P(|S_n| >= x) (or P(S_n >= x) if one-sided).

    Replicas are evaluated in fixed chunks of independent Philox streams, so
    the tally is identical however the chunks are scheduled.
    """
    if reps < 100:
        raise ValueError("use at least 100 replications")
    count = 0
    done = 0
    chunk_index = 0
    while done < reps:
        m = min(MC_CHUNK, reps - done)
        rng = generator(seed, chunk_index)
        sums = _paths(spec, n, m, rng).sum(axis=1)
        stat = sums if one_sided else np.abs(sums)
        count += int(np.count_nonzero(stat >= x))
        done += m
        chunk_index += 1
    lo, hi = wilson_interval(count, reps, confidence)
    return McTailEstimate(p_hat=count / reps, reps=reps, ci_low=lo, ci_high=hi,
                          confidence=confidence,
                          seed_record={"seed": seed, "chunks": chunk_index})


def _chain_count_distribution(spec: ProcessSpec, n: int) -> np.ndarray:
    """Exact distribution of the number of b-states over n stationary steps."""
    p, q = spec.p, spec.q
    pi_b = p / (p + q)
    # dp[state, count]
    dp = np.zeros((2, n + 1))
    dp[0, 0] = 1.0 - pi_b
    dp[1, 1] = pi_b
    for _ in range(n - 1):
        nxt = np.zeros_like(dp)
        nxt[0, :] += dp[0, :] * (1 - p)
        nxt[1, 1:] += dp[0, :-1] * p
        nxt[0, :] += dp[1, :] * q
        nxt[1, 1:] += dp[1, :-1] * (1 - q)
        dp = nxt
    return dp.sum(axis=0)


def exact_tail_small(spec: ProcessSpec, n: int, x: float, max_n: int = 16,
                     one_sided: bool = False) -> float:
    """Exact tail probability for enumerable specs.

    Two-state chains are enumerated through the exact distribution of state
    counts (the partial sum is a function of the count); Rademacher sums use
    binomial tails and work far beyond the enumeration cap.
    """
    if x <= 0:
        return 1.0
    if spec.kind == "rademacher":
        # S_n = 2 B - n with B ~ Binomial(n, 1/2)
        k_hi = math.ceil((n + x) / 2.0)
        upper = float(binom.sf(k_hi - 1, n, 0.5)) if k_hi <= n else 0.0
        if one_sided:
            return upper
        k_lo = math.floor((n - x) / 2.0)
        lower = float(binom.cdf(k_lo, n, 0.5)) if k_lo >= 0 else 0.0
        return upper + lower
    if spec.kind == "two_state_chain":
        if n > max_n:
            raise ValueError(f"enumeration budget exceeded: n={n} > cap {max_n}")
        probs = _chain_count_distribution(spec, n)
        counts = np.arange(n + 1)
        a, b = spec.values
        sums = (n - counts) * (a - spec.mean) + counts * (b - spec.mean)
        stat = sums if one_sided else np.abs(sums)
        return float(probs[stat >= x - 1e-12].sum())
    raise ValueError(f"no exact law for {spec.kind}")


def _exact_alpha_from_joint(joint: np.ndarray) -> float:
    """Strong mixing coefficient of a finite joint table.

    ``joint[i, j]`` is the probability of past atom i and future atom j; the
    supremum over events is taken by enumerating subsets of past atoms and
    splitting future atoms by the sign of the covariance.
    """
    n_past, n_future = joint.shape
    if n_past > 16:
        raise ValueError("too many past atoms to enumerate")
    p_future = joint.sum(axis=0)
    masks = (np.arange(2 ** n_past)[:, None] >> np.arange(n_past)[None, :]) & 1
    p_a = masks @ joint.sum(axis=1)
    p_ab = masks @ joint  # (n_subsets, n_future)
    diff = p_ab - p_a[:, None] * p_future[None, :]
    pos = np.clip(diff, 0.0, None).sum(axis=1)
    neg = np.clip(-diff, 0.0, None).sum(axis=1)
    return float(np.maximum(pos, neg).max())


def _chain_trajectories(spec: ProcessSpec, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All length-m state paths of the stationary chain.

    Returns (state bits, centered values, probabilities); bit True means the
    second state.
    """
    p, q = spec.p, spec.q
    bits = ((np.arange(2 ** m)[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)
    pi_b = p / (p + q)
    probs = np.where(bits[:, 0], pi_b, 1.0 - pi_b)
    stay_a, stay_b = 1.0 - p, 1.0 - q
    for j in range(1, m):
        prev, cur = bits[:, j - 1], bits[:, j]
        step = np.where(prev, np.where(cur, stay_b, q), np.where(cur, p, stay_a))
        probs = probs * step
    a, b = spec.values
    values = np.where(bits, b, a) - spec.mean
    return bits, values, probs


def exact_alpha_two_state(p: float, q: float, lag: int, window: int = 3) -> float:
    """Exact mixing coefficient at the given lag between two finite windows.

    Enumerates the joint law of (X_1..X_w) and (X_{w+lag}..X_{w+lag+w-1}) and
    maximizes |P(A and B) - P(A) P(B)| over all events of the two windows.
    """
    if lag < 1:
        raise ValueError("lag must be at least 1")
    spec = two_state_chain(p, q)
    m = 2 * window + lag - 1
    bits, _, probs = _chain_trajectories(spec, m)
    past_cols = np.arange(window)
    future_cols = np.arange(window) + window + lag - 1
    weights_p = 1 << np.arange(window)
    past_id = bits[:, past_cols].astype(int) @ weights_p
    future_id = bits[:, future_cols].astype(int) @ weights_p
    joint = np.zeros((2 ** window, 2 ** window))
    np.add.at(joint, (past_id, future_id), probs)
    return _exact_alpha_from_joint(joint)


@dataclass(frozen=True)
class IbragimovReport:
    """Product-moment factorization check for nonnegative bounded functionals."""

    p: int
    alpha: float
    product_moment: float
    moment_product: float
    budget: float
    slack: float
    ok: bool


def indicator(position: int, value: float) -> Callable[[np.ndarray], np.ndarray]:
    """Functional 1{X_position == value} on trajectory matrices (1-based position)."""

    def fn(values: np.ndarray) -> np.ndarray:
        return (np.abs(values[:, position - 1] - value) < 1e-12).astype(float)

    return fn


def _ibragimov_on(z: np.ndarray, probs: np.ndarray) -> IbragimovReport:
    if np.any(z < 0):
        raise ValueError("functionals must be nonnegative")
    p = z.shape[1]
    live = probs > 0
    sup = np.array([z[live, j].max() if np.any(live) else 0.0 for j in range(p)])
    prod_moment = float(probs @ np.prod(z, axis=1))
    moment_prod = float(np.prod(probs @ z))
    alpha = 0.0
    for k in range(1, p):
        past_vals, past_id = np.unique(z[:, :k], axis=0, return_inverse=True)
        fut_vals, fut_id = np.unique(z[:, k:], axis=0, return_inverse=True)
        joint = np.zeros((len(past_vals), len(fut_vals)))
        np.add.at(joint, (past_id, fut_id), probs)
        alpha = max(alpha, _exact_alpha_from_joint(joint))
    budget = (p - 1) * alpha * float(np.prod(sup))
    gap = abs(prod_moment - moment_prod)
    return IbragimovReport(p=p, alpha=alpha, product_moment=prod_moment,
                           moment_product=moment_prod, budget=budget,
                           slack=budget - gap, ok=gap <= budget + 1e-12)


def verify_ibragimov(spec: ProcessSpec, length: int,
                     functionals: Sequence[Callable[[np.ndarray], np.ndarray]]) -> IbragimovReport:
    """Check |E prod Z_i - prod E Z_i| <= (p-1) alpha prod sup Z_i exactly.

    The Z_i are the given nonnegative functionals of the full centered
    trajectory; alpha is the exact mixing coefficient between the sigma-fields
    generated by (Z_1..Z_k) and (Z_{k+1}..Z_p), maximized over the split point
    k.  Requires an enumerable spec (two-state chain, length <= 20).
    """
    if spec.kind != "two_state_chain":
        raise ValueError("exact verification needs an enumerable chain spec")
    if length > 20:
        raise ValueError("enumeration budget exceeded")
    _, values, probs = _chain_trajectories(spec, length)
    z = np.column_stack([np.asarray(f(values), dtype=float) for f in functionals])
    return _ibragimov_on(z, probs)


def ibragimov_indicator_sweep(spec: ProcessSpec, length: int, max_p: int = 4) -> dict:
    """Exhaustive indicator-product verification; returns worst slack found."""
    if spec.kind != "two_state_chain":
        raise ValueError("exact verification needs an enumerable chain spec")
    _, values, probs = _chain_trajectories(spec, length)
    a, b = spec.values
    states = (values[:, :] == b - spec.mean)
    worst = math.inf
    checked = 0
    violations = 0
    for p in range(2, max_p + 1):
        for positions in combinations(range(length), p):
            cols = states[:, list(positions)]
            for pattern in product((False, True), repeat=p):
                z = np.where(cols == np.array(pattern)[None, :], 1.0, 0.0)
                report = _ibragimov_on(z, probs)
                checked += 1
                worst = min(worst, report.slack)
                violations += 0 if report.ok else 1
    return {"checked": checked, "violations": violations, "worst_slack": worst}


@dataclass(frozen=True)
class ArconesReport:
    """Triangular-array diagnostics: total second moment, sup bound, Lindeberg sum."""

    second_moment_sum: float
    sup_over_sqrt_a: float
    lindeberg_sum: float


def arcones_check(block_sums, sigma_n: float, a_n: float, eps: float) -> ArconesReport:
    """Diagnostics for blockwise arrays X_{n,j} = S_j / sigma_n.

    ``block_sums`` is either a (reps, blocks) sample matrix or a list of
    (values, probabilities) exact block laws.  Reports sum_j E X^2, the
    largest |X| relative to sqrt(a_n), and the Lindeberg sum at level
    eps * sqrt(a_n).
    """
    if sigma_n <= 0:
        raise ValueError("sigma_n must be positive")
    threshold = eps * math.sqrt(a_n)
    if isinstance(block_sums, np.ndarray):
        x = block_sums / sigma_n
        m2 = float(np.mean(x ** 2, axis=0).sum())
        sup = float(np.abs(x).max())
        lind = float(np.mean(x ** 2 * (np.abs(x) > threshold), axis=0).sum())
    else:
        m2 = sup = lind = 0.0
        for values, probs in block_sums:
            v = np.asarray(values, dtype=float) / sigma_n
            w = np.asarray(probs, dtype=float)
            m2 += float(w @ v ** 2)
            live = w > 0
            if np.any(live):
                sup = max(sup, float(np.abs(v[live]).max()))
            lind += float(w @ (v ** 2 * (np.abs(v) > threshold)))
    return ArconesReport(second_moment_sum=m2,
                         sup_over_sqrt_a=sup / math.sqrt(a_n),
                         lindeberg_sum=lind)
