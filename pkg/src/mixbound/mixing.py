"""Mixing profiles and the dependent-variance proxies of bounded mixing sequences.

A geometric profile models alpha(k) <= exp(-2*c*k); tabulated profiles carry a
finite nonincreasing table of coefficients.  All alpha coefficients live in
[0, 1/4], the universal maximum of the strong mixing coefficient.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Sequence

ALPHA_MAX = 0.25


@dataclass(frozen=True)
class MixingProfile:
    """Mixing rate description: geometric decay rate or a tabulated sequence.

    ``kind`` is "geometric" (with rate ``c`` per unit lag, ``math.inf`` meaning
    an independent sequence) or "tabulated" (with ``values[k-1]`` the
    coefficient at lag k, held constant beyond the table).  ``lambda2``
    optionally records the second eigenvalue of the chain that produced the
    profile.
    """

    kind: str
    c: float | None = None
    values: tuple[float, ...] | None = None
    lambda2: float | None = None

    def __post_init__(self):
        if self.kind == "geometric":
            if self.c is None or not self.c > 0:
                raise ValueError("geometric profile requires a rate c > 0")
        elif self.kind == "tabulated":
            if not self.values:
                raise ValueError("tabulated profile requires a nonempty table")
            vals = tuple(float(v) for v in self.values)
            if any(v < 0 or v > ALPHA_MAX for v in vals):
                raise ValueError("tabulated coefficients must lie in [0, 1/4]")
            if any(a < b for a, b in zip(vals, vals[1:])):
                raise ValueError("tabulated coefficients must be nonincreasing")
            object.__setattr__(self, "values", vals)
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def c_effective(self) -> float:
        """Largest geometric rate dominated by the profile.

        For tabulated profiles this is min over tabulated lags k of
        -log(alpha(k)) / (2k); zero entries contribute an infinite rate.
        """
        if self.kind == "geometric":
            return self.c
        rates = []
        for k, v in enumerate(self.values, start=1):
            rates.append(math.inf if v == 0.0 else -math.log(v) / (2.0 * k))
        return min(rates)

    def to_json(self) -> dict:
        if self.kind == "geometric":
            out = {"kind": "geometric", "c": None if math.isinf(self.c) else self.c}
        else:
            out = {"kind": "tabulated", "values": list(self.values)}
        if self.lambda2 is not None:
            out["lambda2"] = self.lambda2
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "MixingProfile":
        kind = doc.get("kind")
        if kind == "geometric":
            c = doc.get("c")
            return cls(kind="geometric", c=math.inf if c is None else float(c),
                       lambda2=doc.get("lambda2"))
        if kind == "tabulated":
            return cls(kind="tabulated", values=tuple(doc["values"]),
                       lambda2=doc.get("lambda2"))
        raise ValueError(f"unknown profile kind {kind!r}")


def geometric_profile(c: float) -> MixingProfile:
    return MixingProfile(kind="geometric", c=c)


def independent_profile() -> MixingProfile:
    """All coefficients zero beyond lag 0 (iid-style sequence)."""
    return MixingProfile(kind="geometric", c=math.inf, lambda2=0.0)


def tabulated_profile(values: Sequence[float]) -> MixingProfile:
    return MixingProfile(kind="tabulated", values=tuple(values))


def alpha_at(profile: MixingProfile, k: int) -> float:
    """Mixing coefficient at integer lag k, clamped to the universal 1/4 cap."""
    if k < 0:
        raise ValueError("lag must be nonnegative")
    if k == 0:
        return ALPHA_MAX
    if profile.kind == "geometric":
        if math.isinf(profile.c):
            return 0.0
        return min(ALPHA_MAX, math.exp(-2.0 * profile.c * k))
    vals = profile.values
    return vals[k - 1] if k <= len(vals) else vals[-1]


def alpha_tail_sum(profile: MixingProfile, start: int = 1) -> float:
    """Sum of alpha(k) for k >= start, in closed form for geometric profiles.

    Tabulated profiles extend by holding their last value, so their tail sum
    diverges unless the table ends in zero.
    """
    if start < 1:
        raise ValueError("tail sums start at lag 1 or beyond")
    if profile.kind == "geometric":
        if math.isinf(profile.c):
            return 0.0
        r = math.exp(-2.0 * profile.c)
        # first lag where exp(-2ck) drops below the 1/4 clamp
        k_free = max(1, math.ceil(math.log(4.0) / (2.0 * profile.c)))
        clamped = max(0, k_free - start)
        geo_start = max(start, k_free)
        return ALPHA_MAX * clamped + r ** geo_start / (1.0 - r)
    vals = profile.values
    if vals[-1] > 0.0:
        raise ValueError("non-summable profile: tabulated table does not end in zero")
    return math.fsum(vals[start - 1:])


def k_constant(profile: MixingProfile) -> float:
    """Variance-inflation constant 1 + 8 * sum_{k>=1} alpha(k); at least 1."""
    return 1.0 + 8.0 * alpha_tail_sum(profile, 1)


@dataclass(frozen=True)
class SequenceSpec:
    """Hypotheses on a bounded centered sequence: bound M, profile, optional v^2."""

    M: float
    profile: MixingProfile
    v_squared: float | None = None
    stationary: bool = False

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("uniform bound M must be positive")
        if self.v_squared is not None:
            if self.v_squared < 0:
                raise ValueError("v^2 must be nonnegative")
            try:
                cap = k_constant(self.profile) * self.M ** 2
            except ValueError:
                cap = math.inf
            if self.v_squared > cap * (1.0 + 1e-12):
                raise ValueError(f"v^2={self.v_squared} exceeds K*M^2={cap}")


class QuantileFunction:
    """Nonincreasing map u -> Q(u) on (0, 1], callable or a finite step table."""

    def __init__(self, fn: Callable[[float], float]):
        self._fn = fn
        if fn(1.0) < 0:
            raise ValueError("Q(1) must be nonnegative")

    def __call__(self, u: float) -> float:
        if not 0.0 < u <= 1.0:
            raise ValueError("quantile argument must lie in (0, 1]")
        return self._fn(u)

    @classmethod
    def from_callable(cls, fn: Callable[[float], float]) -> "QuantileFunction":
        return cls(fn)

    @classmethod
    def from_table(cls, us: Sequence[float], qs: Sequence[float]) -> "QuantileFunction":
        """Step function: Q(u) = qs[i] for the smallest tabulated us[i] >= u."""
        pairs = sorted(zip(us, qs))
        u_sorted = [u for u, _ in pairs]
        q_sorted = [q for _, q in pairs]
        if any(a < b for a, b in zip(q_sorted, q_sorted[1:])):
            raise ValueError("table must define a nonincreasing Q")

        def fn(u: float) -> float:
            i = bisect.bisect_left(u_sorted, u)
            if i == len(u_sorted):
                return q_sorted[-1]
            return q_sorted[i]

        return cls(fn)


def v_squared_general(cov: Callable[[int, int], float], horizon: int,
                      profile: MixingProfile, M: float) -> float:
    """Dependent-variance proxy sup_i (Var X_i + 2 sum_{j>i} |Cov(X_i, X_j)|).

    The oracle supplies exact covariances for 1 <= i <= j <= horizon; lags
    beyond the horizon are majorized by 4 * alpha(k) * M^2 per covariance.
    The supremum is taken over i <= horizon/2 so that every candidate keeps at
    least half the horizon of exact lags; pick the horizon large enough that
    the majorized tail is below the accuracy you need.
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    i_max = max(1, horizon // 2)
    best = 0.0
    for i in range(1, i_max + 1):
        var_i = cov(i, i)
        if var_i < 0:
            raise ValueError(f"covariance oracle returned negative variance at i={i}")
        total = var_i + 2.0 * math.fsum(abs(cov(i, j)) for j in range(i + 1, horizon + 1))
        total += 8.0 * M ** 2 * alpha_tail_sum(profile, horizon - i + 1)
        best = max(best, total)
    return best


def v_squared_stationary(var_x1: float, second_moment_tail: Callable[[float], float],
                         q: QuantileFunction, profile: MixingProfile,
                         tol: float = 1e-12, max_terms: int = 100_000) -> float:
    """Stationary variance proxy Var(X_1) + 4 sum_i E[X_1^2 1{|X_1| >= Q(2 alpha_i)}].

    Terms with alpha_i == 0 vanish (the quantile argument leaves the domain of
    Q and the defining integral is empty).  Raises if the series has not
    decayed below ``tol`` relative accuracy within ``max_terms`` terms, which
    happens for laws whose mass sits exactly at the essential bound.
    """
    if var_x1 < 0:
        raise ValueError("variance must be nonnegative")
    total = var_x1
    for i in range(1, max_terms + 1):
        a = alpha_at(profile, i)
        if a == 0.0:
            return total
        term = 4.0 * second_moment_tail(q(2.0 * a))
        if term < 0:
            raise ValueError("second-moment tail oracle returned a negative value")
        total += term
        scale = total if total > 0 else 1.0
        if term <= tol * scale:
            return total
    raise RuntimeError(f"v^2 series did not converge within {max_terms} terms")


def markov2_mixing(p: float, q: float) -> MixingProfile:
    """Geometric mixing profile of the stationary two-state chain.

    ``p`` and ``q`` are the two switching probabilities.  The second
    eigenvalue is 1 - p - q and alpha(k) <= |1-p-q|^k / 4 <= exp(-2ck) with
    c = -log|1-p-q| / 2.
    """
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError("switching probabilities must lie in (0, 1)")
    lam = 1.0 - p - q
    if lam == 0.0:
        return MixingProfile(kind="geometric", c=math.inf, lambda2=0.0)
    if abs(lam) >= 1.0:
        raise ValueError("non-mixing chain: |1 - p - q| = 1")
    c = -math.log(abs(lam)) / 2.0
    return MixingProfile(kind="geometric", c=c, lambda2=lam)
