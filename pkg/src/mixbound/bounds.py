"""Closed-form tail and log-Laplace bounds for bounded geometrically mixing sums.

Three probability bounds are exposed: a fully explicit one (``bern3_bound``)
whose constant is computable from the mixing rate alone, and two parametric
families whose constants depend on the rate only through parameters that can
be user-supplied, replay-derived or calibrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .mixing import MixingProfile, SequenceSpec, k_constant

LOG2 = math.log(2.0)


class BoundNotApplicable(Exception):
    """A bound's precondition fails for the requested arguments."""


@dataclass(frozen=True)
class TheoremConstants:
    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3) <= 0:
            raise ValueError("theorem constants must be positive")


@dataclass(frozen=True)
class LaplaceBound:
    """Envelope t -> sigma2 * t^2 / (1 - kappa * t) on [0, valid_t_max)."""

    sigma2: float
    kappa: float
    valid_t_max: float = math.inf

    def __post_init__(self):
        if self.sigma2 < 0 or self.kappa < 0:
            raise ValueError("sigma2 and kappa must be nonnegative")
        cap = math.inf if self.kappa == 0 else 1.0 / self.kappa
        vmax = min(self.valid_t_max, cap)
        if not vmax > 0:
            raise ValueError("validity range must be nonempty")
        object.__setattr__(self, "valid_t_max", vmax)

    def evaluate(self, t: float) -> float:
        if not 0.0 <= t < self.valid_t_max:
            raise ValueError(f"t={t} outside [0, {self.valid_t_max})")
        return self.sigma2 * t * t / (1.0 - self.kappa * t)


@dataclass(frozen=True)
class BoundConstants:
    """All constants entering the bounds for a given mixing rate c."""

    c: float
    c0: float
    K: float
    C_bc: float
    c_prime: float
    thm1: TheoremConstants
    thm2: TheoremConstants
    source: str

    def to_json(self) -> dict:
        return {
            "c": self.c, "c0": self.c0, "K": self.K, "C_bc": self.C_bc,
            "c_prime": self.c_prime,
            "thm1": [self.thm1.c1, self.thm1.c2, self.thm1.c3],
            "thm2": [self.thm2.c1, self.thm2.c2, self.thm2.c3],
            "source": self.source,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BoundConstants":
        return cls(c=doc["c"], c0=doc["c0"], K=doc["K"], C_bc=doc["C_bc"],
                   c_prime=doc["c_prime"],
                   thm1=TheoremConstants(*doc["thm1"]),
                   thm2=TheoremConstants(*doc["thm2"]),
                   source=doc["source"])


def _replay_thm1(c: float, K: float, C_bc: float, c_prime: float) -> TheoremConstants:
    """Conservative defaults by aggregating the per-level Laplace envelopes.

    Levels peel from n down to n / log n; each contributes a fraction-form
    envelope whose linear coefficient is log(n/2^i) / c0 and whose variance
    coefficient scales like c' * (v sqrt(n/2^i) + M / sqrt(n/2^i))^2 with
    v^2 <= K M^2.  Small n falls back to the direct quartic-range envelope.
    The suprema over n are deliberately loose.
    """
    c0 = min(c / 8.0, math.sqrt(c * LOG2 / 8.0))
    c_small = 4.0 * max(c, 10.0) ** 2
    n_small_max = 16.0 * max(c, 10.0) ** 2
    c1 = 0.0
    c2 = 3.1 * K
    n = 4.0
    while n <= 1e18:
        log_n = math.log(n)
        ll_n = math.log(log_n)
        denom_lin = log_n * ll_n
        if n <= n_small_max:
            c1 = max(c1, c_small / denom_lin)
        levels = int(ll_n / LOG2) + 1
        kappa = sum(math.log(n / 2 ** i) for i in range(levels)) / c0
        kappa += 2.0 / min(c, 1.0)
        c1 = max(c1, kappa / denom_lin)
        sigma = sum(math.sqrt(c_prime) * (math.sqrt(K) * 2 ** (-i / 2.0)
                                          + math.sqrt(2.0 ** i) / n)
                    for i in range(levels))
        sigma += math.sqrt(C_bc)
        c2 = max(c2, sigma * sigma)
        n *= 1.5
    c3 = 1.0 / (2.0 * max(4.0 * c2, 2.0 * c1))
    return TheoremConstants(c1=c1, c2=c2, c3=c3)


def _replay_thm2(c: float, K: float, C_bc: float, c_prime: float) -> TheoremConstants:
    """Same aggregation with the deeper peel that stops at length 2*max(c, 10)."""
    c0 = min(c / 8.0, math.sqrt(c * LOG2 / 8.0))
    floor_len = 2.0 * max(c, 10.0)
    kappa_last = max(c, 10.0) / 2.0
    sigma_last = math.sqrt(3.1) * 2.0 * max(c, 10.0)
    c1 = 0.0
    c2 = 3.1
    n = 2.0
    while n <= 1e18:
        log_n = math.log(n)
        denom_lin = log_n * log_n
        if n <= floor_len:
            # whole sum fits one small block: t |S_n| <= 4 when t M <= 4 / n
            c1 = max(c1, (n / 4.0) / denom_lin)
            c2 = max(c2, 3.1)
        else:
            levels = max(1, int((log_n - math.log(floor_len)) / LOG2) + 1)
            kappa = sum(math.log(n / 2 ** i) for i in range(levels)) / c0
            kappa += kappa_last
            c1 = max(c1, kappa / denom_lin)
            # split Sigma sigma_i into its v part and its M part
            sig_v = math.sqrt(c_prime) * sum(2 ** (-i / 2.0) for i in range(levels))
            sig_m = math.sqrt(c_prime) * sum(math.sqrt(2.0 ** i / n)
                                             for i in range(levels))
            sig_m += sigma_last
            c2 = max(c2, 2.0 * sig_v ** 2, 2.0 * sig_m ** 2)
        n *= 1.5
    c3 = 1.0 / (2.0 * max(4.0 * c2, 2.0 * c1))
    return TheoremConstants(c1=c1, c2=c2, c3=c3)


def make_constants(c: float, profile: MixingProfile,
                   overrides: dict | None = None) -> BoundConstants:
    """Assemble the bound constants for mixing rate c.

    ``c0``, ``K`` and the explicit constant are computed exactly.  The
    parametric theorem constants come from ``overrides`` (keys "thm1",
    "thm2" as (C1, C2, C3) triples, optional "c_prime"), else from a
    conservative replay of the peeling aggregation; ``source`` records which.
    """
    if not c > 0:
        raise ValueError("mixing rate c must be positive")
    overrides = overrides or {}
    K = k_constant(profile)
    c0 = min(c / 8.0, math.sqrt(c * LOG2 / 8.0))
    C_bc = 6.2 * K + (1.0 / c + 8.0 / c ** 2) + 2.0 / (c * LOG2)
    # explicit fraction-form constant: exp(-x) <= 2/x^2 turns the residual
    # exponential into a quadratic term
    c_prime = overrides.get("c_prime", max(6.2, 16.0 * (c + 1.0) / c ** 2))
    if c_prime <= 0:
        raise ValueError("c_prime override must be positive")
    if "thm1" in overrides or "thm2" in overrides:
        if not ("thm1" in overrides and "thm2" in overrides):
            raise ValueError("override thm1 and thm2 together")
        thm1 = TheoremConstants(*overrides["thm1"])
        thm2 = TheoremConstants(*overrides["thm2"])
        source = "user"
    else:
        thm1 = _replay_thm1(c, K, C_bc, c_prime)
        thm2 = _replay_thm2(c, K, C_bc, c_prime)
        source = "explicit"
    return BoundConstants(c=c, c0=c0, K=K, C_bc=C_bc, c_prime=c_prime,
                          thm1=thm1, thm2=thm2, source=source)


def calibrate_c3(exact_tail, denominator, grid) -> float:
    """Largest admissible C3 on an enumeration grid.

    ``exact_tail(n, x)`` returns the exact two-sided tail, ``denominator(n, x)``
    the bound's denominator (without C3).  The result is the largest C3 for
    which exp(-C3 x^2 / denominator) dominates the exact tail at every grid
    point.
    """
    best = math.inf
    for n, x in grid:
        p = exact_tail(n, x)
        if p <= 0.0 or x <= 0.0:
            continue
        best = min(best, denominator(n, x) * (-math.log(p)) / x ** 2)
    if not math.isfinite(best):
        raise ValueError("calibration grid produced no binding points")
    return best


def bern3_bound(n: int, x: float, M: float, constants: BoundConstants) -> float:
    """Fully explicit tail bound exp(-x^2 / (4 C n log n M^2 + 4 M x / (c ^ 1)))."""
    c = constants.c
    if n < 2.0 * max(c, 2.0):
        raise BoundNotApplicable(f"needs n >= 2*max(c, 2) = {2.0 * max(c, 2.0)}")
    if x < 0:
        raise ValueError("deviation x must be nonnegative")
    denom = n * math.log(n) * 4.0 * constants.C_bc * M ** 2 + 4.0 * M * x / min(c, 1.0)
    return min(1.0, math.exp(-x * x / denom))


def bern1_bound(n: int, x: float, M: float, constants: BoundConstants) -> float:
    """Tail bound exp(-C3 x^2 / (n M^2 + M x log n loglog n)), n >= 4."""
    if n < 4:
        raise BoundNotApplicable("needs n >= 4")
    if x < 0:
        raise ValueError("deviation x must be nonnegative")
    log_n = math.log(n)
    denom = n * M ** 2 + M * x * log_n * math.log(log_n)
    return min(1.0, math.exp(-constants.thm1.c3 * x * x / denom))


def bern2_bound(n: int, x: float, M: float, v2: float,
                constants: BoundConstants) -> float:
    """Tail bound exp(-C3 x^2 / (v^2 n + M^2 + x M log^2 n)), n >= 2."""
    if n < 2:
        raise BoundNotApplicable("needs n >= 2")
    if x < 0:
        raise ValueError("deviation x must be nonnegative")
    if v2 < 0:
        raise ValueError("v^2 must be nonnegative")
    denom = v2 * n + M ** 2 + x * M * math.log(n) ** 2
    return min(1.0, math.exp(-constants.thm2.c3 * x * x / denom))


def laplace_small_t(B: float, t: float, M: float, v2: float, c: float) -> float:
    """Small-t log-Laplace envelope B (6.2 t^2 v^2 + (M t / 2) exp(-c / (2 t M)))."""
    if B < 2:
        raise ValueError("length B must be at least 2")
    if t == 0.0:
        return 0.0
    tm = t * M
    cap = min(0.5, math.sqrt(c / (2.0 * B)))
    if not 0.0 < tm <= cap:
        raise ValueError(f"t*M = {tm} violates 0 < t*M <= min(1/2, sqrt(c/(2B))) = {cap}")
    return B * (6.2 * t * t * v2 + 0.5 * M * t * math.exp(-c / (2.0 * tm)))


def laplace_cantor(A: float, t: float, M: float, v2: float,
                   constants: BoundConstants, variant: str) -> float:
    """Log-Laplace envelope over the leaf set ("cantor_set") or all of (0, A]."""
    c = constants.c
    tm = t * M
    if variant == "cantor_set":
        if A < 2.0 * max(c, 10.0):
            raise ValueError(f"needs A >= 2*max(c, 10) = {2.0 * max(c, 10.0)}")
        if t == 0.0:
            return 0.0
        cap = constants.c0 / math.log(A)
        if not 0.0 <= tm <= cap:
            raise ValueError(f"t*M = {tm} violates t*M <= c0/log A = {cap}")
        return 6.2 * v2 * t * t * A + (c + 1.0) / A * math.exp(-c / (4.0 * tm))
    if variant == "full_interval":
        if A < max(4.0, 2.0 * c):
            raise ValueError(f"needs A >= max(4, 2c) = {max(4.0, 2.0 * c)}")
        cap = min(c, 1.0) / 2.0
        if not 0.0 <= tm < cap:
            raise ValueError(f"t*M = {tm} violates t*M < (min(c,1))/2 = {cap}")
        return constants.C_bc * t * t * M ** 2 * A * math.log(A)
    raise ValueError(f"unknown variant {variant!r}")


def laplace_fraction(n_or_A: float, t: float, M: float,
                     constants: BoundConstants, which: str,
                     v2: float | None = None) -> float:
    """Fraction-form log-Laplace bounds; errors at or beyond the pole."""
    A = float(n_or_A)
    tm = t * M
    if which == "inex":
        if v2 is None:
            raise ValueError("inex needs v2")
        pole = constants.c0 / math.log(A)
        if not 0.0 <= tm < pole:
            raise ValueError(f"t*M = {tm} at or beyond the pole {pole}")
        v = math.sqrt(v2)
        return (constants.c_prime * t * t * A * (v + M / A) ** 2
                / (1.0 - tm * math.log(A) / constants.c0))
    if which == "inex2":
        pole = min(constants.c, 1.0) / 2.0
        if not 0.0 <= tm < pole:
            raise ValueError(f"t*M = {tm} at or beyond the pole {pole}")
        return (constants.C_bc * t * t * A * M ** 2 * math.log(A)
                / (1.0 - 2.0 * tm / min(constants.c, 1.0)))
    if which == "thm1":
        if A < 4:
            raise ValueError("thm1 fraction needs n >= 4")
        lin = constants.thm1.c1 * math.log(A) * math.log(math.log(A))
        if not 0.0 <= tm * lin < 1.0:
            raise ValueError(f"t*M = {tm} at or beyond the pole {1.0 / lin}")
        return constants.thm1.c2 * t * t * A * M ** 2 / (1.0 - constants.thm1.c1 * tm
                                                         * math.log(A) * math.log(math.log(A)))
    if which == "thm2":
        if v2 is None:
            raise ValueError("thm2 needs v2")
        lin = constants.thm2.c1 * math.log(A) ** 2
        if not 0.0 <= tm * lin < 1.0:
            raise ValueError(f"t*M = {tm} at or beyond the pole {1.0 / lin}")
        return (constants.thm2.c2 * t * t * (A * v2 + M ** 2)
                / (1.0 - constants.thm2.c1 * tm * math.log(A) ** 2))
    raise ValueError(f"unknown bound family {which!r}")


def aggregate_breta(parts: list[LaplaceBound], t: float) -> tuple[float, LaplaceBound]:
    """Combine fraction-form envelopes: sigmas add, kappas add.

    Returns the combined envelope value at ``t`` together with the composite
    :class:`LaplaceBound`; valid for t in [0, 1 / sum kappa_i).
    """
    if not parts:
        raise ValueError("need at least one envelope")
    sigma = sum(math.sqrt(p.sigma2) for p in parts)
    kappa = sum(p.kappa for p in parts)
    composite = LaplaceBound(sigma2=sigma * sigma, kappa=kappa)
    if not 0.0 <= t < composite.valid_t_max:
        raise ValueError(f"t={t} outside [0, {composite.valid_t_max})")
    return composite.evaluate(t), composite


@dataclass(frozen=True)
class TailReport:
    """Values of all applicable tail bounds at (n, x) and the best of them."""

    n: int
    x: float
    M: float
    v2: float | None
    bounds: dict
    best_label: str
    best_value: float

    def to_json(self) -> dict:
        return {"n": self.n, "x": self.x, "M": self.M, "v2": self.v2,
                "bounds": dict(self.bounds),
                "best": {"label": self.best_label, "value": self.best_value}}

    def csv_rows(self) -> list[dict]:
        return [{"n": self.n, "x": self.x, "bound": name, "value": value,
                 "is_best": name == self.best_label}
                for name, value in self.bounds.items()]


def best_bound(n: int, x: float, spec: SequenceSpec,
               constants: BoundConstants) -> TailReport:
    """Evaluate every applicable bound and pick the minimum."""
    bounds = {}
    try:
        bounds["bern1"] = bern1_bound(n, x, spec.M, constants)
    except BoundNotApplicable:
        pass
    if spec.v_squared is not None:
        try:
            bounds["bern2"] = bern2_bound(n, x, spec.M, spec.v_squared, constants)
        except BoundNotApplicable:
            pass
    try:
        bounds["bern3"] = bern3_bound(n, x, spec.M, constants)
    except BoundNotApplicable:
        pass
    if not bounds:
        raise BoundNotApplicable(f"no bound applicable at n={n}")
    best_label = min(bounds, key=bounds.get)
    return TailReport(n=n, x=x, M=spec.M, v2=spec.v_squared, bounds=bounds,
                      best_label=best_label, best_value=bounds[best_label])
