"""Cantor-style middle-deletion schemes, gap-removal maps, peeling and block plans.

All intervals are half-open (l, r], which keeps interval sums of the unit-cell
embedding free of double counting.  Construction is replayed in exact rational
arithmetic when both the interval length and the deletion fraction are given
as :class:`fractions.Fraction`; otherwise floats with 1e-12 measure tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np


def _measure(pairs) -> float:
    lengths = [r - l for l, r in pairs]
    if lengths and isinstance(lengths[0], Fraction):
        return sum(lengths, start=Fraction(0))
    return math.fsum(lengths)


@dataclass(frozen=True)
class IntervalUnion:
    """Ordered union of disjoint half-open intervals (l, r]."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((l, r) for l, r in self.intervals)
        for l, r in ivs:
            if not l < r:
                raise ValueError(f"degenerate interval ({l}, {r}]")
        for (_, r0), (l1, _) in zip(ivs, ivs[1:]):
            if l1 < r0:
                raise ValueError("intervals must be disjoint and sorted")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "IntervalUnion":
        return cls(tuple((l, r) for l, r in pairs))

    @property
    def measure(self) -> float:
        return _measure(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def to_json(self) -> dict:
        return {"intervals": [[float(l), float(r)] for l, r in self.intervals]}


@dataclass(frozen=True)
class CantorScheme:
    """Level-k middle-deletion subset of [0, A] with deletion fraction delta.

    ``measure`` is the closed form A (1 - delta)^k, the construction's
    defining identity; summing float leaf endpoints reproduces it only up to
    endpoint rounding (about 1e-11 relative at A = 1e6).
    """

    A: float
    delta: float
    k: int
    leaves: IntervalUnion

    @property
    def leaf_length(self) -> float:
        return self.A * ((1 - self.delta) / 2) ** self.k

    @property
    def measure(self) -> float:
        return self.A * (1 - self.delta) ** self.k

    def to_json(self) -> dict:
        return {"A": float(self.A), "delta": float(self.delta), "k": self.k,
                "measure": float(self.measure), "leaves": self.leaves.to_json()}


def default_delta(A) -> float:
    """Deletion fraction log2 / (2 log A); at most 1/2 for A >= 2."""
    if A < 2:
        raise ValueError("default deletion fraction needs A >= 2")
    return math.log(2.0) / (2.0 * math.log(A))


def _level_count(A, delta) -> int:
    """Largest k with ((1-delta)/2)^k >= 1/A."""
    ratio = (1 - delta) / 2
    inv = 1 / A
    k = 0
    power = ratio
    while power >= inv:
        k += 1
        power = power * ratio
    return k


def _split_leaves(A, delta, k):
    """Endpoint lists after k middle deletions of relative size delta on [0, A]."""
    exact = isinstance(A, Fraction) and isinstance(delta, Fraction)
    if exact:
        lefts, rights = [Fraction(0)], [A]
        for j in range(1, k + 1):
            seg = A * ((1 - delta) / 2) ** j
            nl = lefts + [r - seg for r in rights]
            nr = [l + seg for l in lefts] + rights
            order = sorted(range(len(nl)), key=nl.__getitem__)
            lefts = [nl[i] for i in order]
            rights = [nr[i] for i in order]
        return lefts, rights
    A = float(A)
    delta = float(delta)
    ratio = (1.0 - delta) / 2.0
    if k == 0:
        return [0.0], [A]
    # closed form: choosing the right half at level j shifts the left endpoint
    # by A * ratio^(j-1) * (1 - ratio); leaf lengths are exactly A * ratio^k
    leaf_len = A * ratio ** k
    bits = ((np.arange(2 ** k)[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1)
    shifts = A * (1.0 - ratio) * ratio ** np.arange(k)
    lefts = bits @ shifts
    rights = lefts + leaf_len
    return list(lefts), list(rights)


def build_cantor(A, delta) -> CantorScheme:
    """Construct the middle-deletion scheme on [0, A].

    Deletes the central fraction ``delta`` of every current interval, as many
    times as the leaf length stays at least 1 (k = 0 leaves the whole
    interval).  Leaf measure after k steps is A * (1 - delta)^k.
    """
    if A < 2:
        raise ValueError("construction needs A >= 2")
    if not 0 < delta < 1:
        raise ValueError("deletion fraction must lie in (0, 1)")
    k = _level_count(A, delta)
    lefts, rights = _split_leaves(A, delta, k)
    leaves = IntervalUnion.from_pairs(list(zip(lefts, rights)))
    return CantorScheme(A=A, delta=delta, k=k, leaves=leaves)


def group(scheme: CantorScheme, level: int) -> list[IntervalUnion]:
    """Partition the leaves into 2^level consecutive groups.

    Adjacent groups at level l are separated by at least the level-l gap
    A * delta * ((1-delta)/2)^(l-1).
    """
    if not 0 <= level <= scheme.k:
        raise ValueError(f"level must lie in [0, {scheme.k}]")
    per = 2 ** (scheme.k - level)
    ivs = scheme.leaves.intervals
    return [IntervalUnion(ivs[j * per:(j + 1) * per]) for j in range(2 ** level)]


class GapMap:
    """Nondecreasing map F(t) = Lebesgue measure of [0, t] outside the leaves.

    F is piecewise linear with slope 0 on leaves and slope 1 on gaps; the
    right-continuous inverse maps the collapsed coordinate in
    [0, A - measure(leaves)] back to gap coordinates.
    """

    def __init__(self, scheme: CantorScheme):
        self.scheme = scheme
        ivs = scheme.leaves.intervals
        self._lefts = np.array([float(l) for l, _ in ivs])
        self._rights = np.array([float(r) for _, r in ivs])
        lengths = self._rights - self._lefts
        self._cum = np.concatenate([[0.0], np.cumsum(lengths)])
        # interior gaps (the construction keeps 0 and A as leaf endpoints)
        self._gap_starts = self._rights[:-1]
        gap_lengths = self._lefts[1:] - self._rights[:-1]
        self._gap_cum = np.cumsum(gap_lengths) if len(gap_lengths) else np.array([])
        self.total_gap = float(self.scheme.A) - float(scheme.leaves.measure)

    def forward(self, t):
        """F(t), vectorized over t in [0, A]."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > float(self.scheme.A) * (1 + 1e-12)):
            raise ValueError("argument outside [0, A]")
        i = np.searchsorted(self._lefts, t, side="right") - 1
        i = np.clip(i, 0, len(self._lefts) - 1)
        inside = np.minimum(np.maximum(t - self._lefts[i], 0.0),
                            self._rights[i] - self._lefts[i])
        mass = self._cum[i] + inside
        # before the first leaf (cannot happen here, left endpoint is 0)
        return t - mass

    def inverse(self, y):
        """Right-continuous inverse of F on [0, A - measure(leaves)]."""
        y = np.asarray(y, dtype=float)
        if np.any(y < 0) or np.any(y > self.total_gap * (1 + 1e-12)):
            raise ValueError("argument outside [0, total gap mass]")
        if len(self._gap_cum) == 0:
            return np.full_like(y, float(self.scheme.A))
        j = np.searchsorted(self._gap_cum, y, side="right")
        at_end = j >= len(self._gap_cum)
        j_safe = np.minimum(j, len(self._gap_cum) - 1)
        before = np.where(j_safe > 0, self._gap_cum[j_safe - 1], 0.0)
        t = self._gap_starts[j_safe] + (y - before)
        return np.where(at_end, float(self.scheme.A), t)


def gap_map(scheme: CantorScheme) -> GapMap:
    return GapMap(scheme)


@dataclass(frozen=True)
class PeelSequence:
    """Shrinking lengths A_0 > A_1 > ... produced by repeatedly removing leaves."""

    A_values: tuple[float, ...]
    schemes: tuple[CantorScheme, ...]
    L: int
    stop: str
    threshold: float


def peel(n: int, stop: str = "theorem1", c: float | None = None) -> PeelSequence:
    """Iterate A_{i+1} = A_i - measure(leaves(A_i)) until the stopping rule fires.

    ``stop`` selects the threshold: "theorem1" stops at A_j <= n / log n,
    "theorem2" at A_j <= 2 * max(c, 10) and requires ``c``.  Each level uses
    the default deletion fraction, so lengths at least halve per level.
    """
    if n < 4:
        raise ValueError("peeling needs n >= 4")
    if stop == "theorem1":
        threshold = n / math.log(n)
    elif stop == "theorem2":
        if c is None:
            raise ValueError("theorem2 stopping rule requires the mixing rate c")
        threshold = 2.0 * max(c, 10.0)
    else:
        raise ValueError(f"unknown stopping rule {stop!r}")
    a_values = [float(n)]
    schemes = []
    while a_values[-1] > threshold:
        scheme = build_cantor(a_values[-1], default_delta(a_values[-1]))
        schemes.append(scheme)
        a_values.append(a_values[-1] - scheme.measure)
    return PeelSequence(A_values=tuple(a_values), schemes=tuple(schemes),
                        L=len(schemes), stop=stop, threshold=threshold)


EPS_CAP = math.log(2.0) * (1.0 - 1e-9)


@dataclass(frozen=True)
class BlockPlan:
    """Block decomposition of (0, n] used by the moderate-deviation analysis."""

    n: int
    a_n: float
    epsilon_n: float
    delta_n: float
    k_n: int
    blocks: tuple[IntervalUnion, ...]
    remainder: IntervalUnion
    min_gap: float
    branch: str
    eps_capped: bool
    M_n: float | None = None

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def to_json(self) -> dict:
        return {
            "n": self.n, "a_n": self.a_n, "epsilon_n": self.epsilon_n,
            "delta_n": self.delta_n, "k_n": self.k_n, "branch": self.branch,
            "eps_capped": self.eps_capped, "min_gap": self.min_gap,
            "M_n": self.M_n,
            "blocks": [b.to_json() for b in self.blocks],
            "remainder": self.remainder.to_json(),
        }


def _plan_from_delta(n, a_n, epsilon, delta, k_n, branch, capped, M_n=None) -> BlockPlan:
    lefts, rights = _split_leaves(float(n), float(delta), k_n)
    blocks = tuple(IntervalUnion(((l, r),)) for l, r in zip(lefts, rights))
    gaps = [(rights[i], lefts[i + 1]) for i in range(len(lefts) - 1)]
    remainder = IntervalUnion.from_pairs(gaps)
    min_gap = delta * n * ((1.0 - delta) / 2.0) ** (k_n - 1)
    return BlockPlan(n=n, a_n=a_n, epsilon_n=epsilon, delta_n=delta, k_n=k_n,
                     blocks=blocks, remainder=remainder, min_gap=min_gap,
                     branch=branch, eps_capped=capped, M_n=M_n)


def _k_inf(scale: float, ratio: float, target: float) -> int:
    """Smallest j >= 1 with scale * ratio^j <= target."""
    j = 1
    value = scale * ratio
    while value > target:
        j += 1
        value *= ratio
        if j > 10_000:
            raise RuntimeError("block level search failed to terminate")
    return j


def choose_mdp_blocking(n: int, a_n: float) -> BlockPlan:
    """Select the blocking parameters for speed a_n on (0, n].

    The driving scale is sqrt(n * a_n).  With L2 = log n:
    epsilon = (sqrt(n a_n) / L2^2)^(-1/2) when n * a_n >= L2^5 (branch "A"),
    else (sqrt(n a_n) / (L2 log L2))^(-1/2) (branch "B"); epsilon is capped
    just below log 2, delta = epsilon / log n, and k is the smallest level
    whose leaves have length at most sqrt(n a_n).
    """
    if not 0.0 < a_n < 1.0:
        raise ValueError("speed a_n must lie in (0, 1)")
    if n < 16:
        raise ValueError("blocking selection needs n >= 16")
    if n * a_n <= 1.0:
        raise ValueError("speed too small: n * a_n must exceed 1")
    log_n = math.log(n)
    loglog_n = math.log(log_n)
    scale = math.sqrt(n * a_n)
    if n * a_n >= log_n ** 5:
        branch = "A"
        epsilon = (scale / log_n ** 2) ** -0.5
    else:
        branch = "B"
        epsilon = (scale / (log_n * loglog_n)) ** -0.5
    capped = epsilon >= math.log(2.0)
    if capped:
        epsilon = EPS_CAP
    delta = epsilon / log_n
    k_n = _k_inf(float(n), (1.0 - delta) / 2.0, scale)
    return _plan_from_delta(n, a_n, epsilon, delta, k_n, branch, capped)


def choose_mdp_blocking_triangular(n: int, a_n: float, M_n: float) -> BlockPlan:
    """Blocking selection for triangular arrays with row bound M_n.

    epsilon = (sqrt(n a_n) / (M_n log^2 n))^(-1/2) capped below log 2, and the
    level rule scales the length by max(M_n, 1) so every block sum stays below
    sqrt(n a_n) in sup norm.
    """
    if not 0.0 < a_n < 1.0:
        raise ValueError("speed a_n must lie in (0, 1)")
    if n < 16:
        raise ValueError("blocking selection needs n >= 16")
    if M_n <= 0:
        raise ValueError("row bound M_n must be positive")
    if n * a_n <= 1.0:
        raise ValueError("speed too small: n * a_n must exceed 1")
    log_n = math.log(n)
    scale = math.sqrt(n * a_n)
    epsilon = (scale / (M_n * log_n ** 2)) ** -0.5
    capped = epsilon >= math.log(2.0)
    if capped:
        epsilon = EPS_CAP
    delta = epsilon / log_n
    k_n = _k_inf(float(n) * max(M_n, 1.0), (1.0 - delta) / 2.0, scale)
    if 2 ** k_n > 2.0 * max(M_n, 1.0) * math.sqrt(n / a_n):
        raise RuntimeError("internal invariant violated: block count exceeds its cap")
    return _plan_from_delta(n, a_n, epsilon, delta, k_n, "triangular", capped, M_n=M_n)
