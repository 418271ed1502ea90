"""Entropic quantities and the explicit bound functions used by the typicality estimates.

All logarithms are base two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import factorial, prod
from typing import Sequence

import numpy as np

from .partitions import YoungFrame, dim_irrep, enumerate_frames, normalized_profile

LN2 = math.log(2.0)


def _dist(p: Sequence[float]) -> np.ndarray:
    return np.asarray(p, dtype=float)


def entropy(p: Sequence[float]) -> float:
    p = _dist(p)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def relative_entropy(p: Sequence[float], q: Sequence[float]) -> float:
    """D(p||q), +inf when p is not absolutely continuous w.r.t. q."""
    p, q = _dist(p), _dist(q)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    return max(float((p[support] * np.log2(p[support] / q[support])).sum()), 0.0)


def exp2_neg_scaled(a: float, value: float) -> float:
    """2^{-a * value} with the convention 2^{-a * inf} = 0 for a > 0."""
    if math.isinf(value) and value > 0:
        return 0.0
    return 2.0 ** (-a * value)


def pinsker_gap(p: Sequence[float], q: Sequence[float]) -> float:
    """D(p||q) - ||p - q||_1^2 / (2 ln 2); non-negative by Pinsker's inequality."""
    l1 = float(np.abs(_dist(p) - _dist(q)).sum())
    return relative_entropy(p, q) - l1**2 / (2 * LN2)


def entropy_continuity_bound(theta: float, alphabet: int) -> float:
    """-theta log(theta / |A|), valid when ||p - q||_1 <= theta <= 1/2."""
    if not 0 < theta <= 0.5:
        raise ValueError(f"theta must lie in (0, 1/2], got {theta}")
    return -theta * math.log2(theta / alphabet)


def check_entropy_continuity(p: Sequence[float], q: Sequence[float], theta: float) -> bool:
    """True when |H(p) - H(q)| obeys the continuity bound for this pair."""
    if float(np.abs(_dist(p) - _dist(q)).sum()) > theta + 1e-15:
        raise ValueError("pair is farther apart than theta")
    return abs(entropy(p) - entropy(q)) <= entropy_continuity_bound(theta, len(p)) + 1e-12


def keyl_werner_rhs(frame: YoungFrame, s: Sequence[float], n: int, d: int) -> float:
    """(n+1)^{d(d-1)/2} 2^{-n D(frame_bar || s)}."""
    if frame.n != n:
        raise ValueError(f"frame {frame} does not have {n} boxes")
    lam = normalized_profile(frame, d)
    return (n + 1) ** (d * (d - 1) / 2) * exp2_neg_scaled(n, relative_entropy(lam, s))


# --------------------------------------------------------------------------
# dimension estimates


def hook_lower_bound(frame: YoungFrame, d: int) -> Fraction:
    """n! / prod_{i=1}^{d} (lambda_i + d + 1)!, rows padded with zeros to d."""
    denom = prod(factorial(p + d + 1) for p in frame.padded(d))
    return Fraction(factorial(frame.n), denom)


def multinomial(frame: YoungFrame) -> int:
    return factorial(frame.n) // prod(factorial(p) for p in frame.parts)


def gamma1(n: int, d: int) -> float:
    return -(d**6 / n) * math.log2(d**5 / n) + (5 * d**2 / n) * math.log2(2 * n)


def gamma1_hypothesis(n: int, d: int) -> bool:
    """Whether the derivation behind gamma_1 applies: n >= 2d^2 and theta = d^6/n <= 1/2.

    The second condition is what the entropy-continuity step needs; it is
    the operative one, since 2d^6 >= 2d^2.
    """
    return n >= 2 * d**2 and d**6 / n <= 0.5


@dataclass(frozen=True)
class DimBounds:
    lower: Fraction
    exact: int
    upper: int
    entropic_upper: float
    type_lower: float
    gamma1_lower: float
    hypothesis_met: bool

    def ordered(self) -> bool:
        return self.lower <= self.exact <= self.upper


def dim_bounds(frame: YoungFrame, d: int, n: int) -> DimBounds:
    """Hook-length sandwich on dim F_frame and its entropic envelopes.

    ``upper`` is the multinomial n!/prod lambda_i!, ``entropic_upper`` is
    2^{nH(frame_bar)}, ``type_lower`` is 2^{nH}/(n+1)^d and
    ``gamma1_lower`` is 2^{n(H - gamma_1(n))}; the last is only a valid
    lower bound when ``hypothesis_met``.
    """
    if frame.n != n:
        raise ValueError(f"frame {frame} does not have {n} boxes")
    h = entropy(normalized_profile(frame, d))
    return DimBounds(
        lower=hook_lower_bound(frame, d),
        exact=dim_irrep(frame),
        upper=multinomial(frame),
        entropic_upper=2.0 ** (n * h),
        type_lower=2.0 ** (n * h) / (n + 1) ** d,
        gamma1_lower=2.0 ** (n * (h - gamma1(n, d))) if n * (h - gamma1(n, d)) < 1024 else math.inf,
        hypothesis_met=gamma1_hypothesis(n, d),
    )


def log2_dim_irrep(frame_parts: Sequence[int]) -> float:
    """log2 dim F via lgamma and the hook formula; for scans where exact ints are slow."""
    parts = list(frame_parts)
    n = sum(parts)
    conj = [sum(1 for p in parts if p > j) for j in range(parts[0])]
    log_hooks = sum(
        math.log(parts[i] - j - 1 + conj[j] - i - 1 + 1)
        for i in range(len(parts))
        for j in range(parts[i])
    )
    return (math.lgamma(n + 1) - log_hooks) / LN2


def scan_n1(d: int, n_max: int, n_min: int = 1) -> int | None:
    """Smallest N <= n_max such that dim F >= 2^{n(H - gamma_1(n))} for every frame in YF_{d,n}, N <= n <= n_max.

    An empirical stand-in for the unspecified threshold N_1; only practical
    for small d. Returns None if the bound fails at n_max.
    """
    threshold = None
    for n in range(n_max, n_min - 1, -1):
        g = gamma1(n, d)
        ok = all(
            log2_dim_irrep(f.parts) >= n * (entropy(normalized_profile(f, d)) - g) - 1e-9
            for f in enumerate_frames(d, n)
        )
        if not ok:
            break
        threshold = n
    return threshold


def frame_shift_distance(frame: YoungFrame, d: int, n: int) -> Fraction:
    """Exact l1 distance between frame_bar and the profile of lambda_i + d + 1 over n + d(d+1)."""
    if frame.n != n:
        raise ValueError(f"frame {frame} does not have {n} boxes")
    total = n + d * (d + 1)
    return sum(
        (abs(Fraction(p, n) - Fraction(p + d + 1, total)) for p in frame.padded(d)),
        Fraction(0),
    )


# --------------------------------------------------------------------------
# the gamma family


@dataclass(frozen=True)
class BoundContext:
    d_A: int
    d_B: int
    n: int
    r: np.ndarray
    r_A: np.ndarray
    r_B: np.ndarray
    eps: float
    delta: float

    @property
    def d(self) -> int:
        return self.d_A * self.d_B

    @property
    def c1(self) -> float:
        return c1_constant(self.r)


def c1_constant(r: Sequence[float], tol: float = 1e-15) -> float:
    """-log of the smallest positive eigenvalue."""
    r = _dist(r)
    return max(-math.log2(float(r[r > tol].min())), 0.0)


def phi(delta: float, c1: float, d: int, *, strict: bool = True) -> float:
    """2 delta c1 + delta log(d / delta); defined on (0, 1/2)."""
    if strict and not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if delta <= 0:
        return 0.0
    return 2 * delta * c1 + delta * math.log2(d / delta)


@dataclass(frozen=True)
class Gammas:
    g1: float
    g2: float
    g3: float
    g4: float
    g5: float
    g6: float
    g7: float
    phi: float
    gamma: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("g1", "g2", "g3", "g4", "g5", "g6", "g7", "phi", "gamma")}


def gammas(n: int, d_A: int, d_B: int, c1: float, delta: float | None = None, *, strict: bool = False) -> Gammas:
    """All gamma_i(n), phi(delta) and gamma(n) = max_i gamma_i(n).

    gamma_1 is evaluated with d = d_A d_B. ``phi`` is NaN when no delta is given.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    d = d_A * d_B
    g1 = gamma1(n, d)
    g2 = (d**2 / n) * math.log2(n + 1) + g1
    g7 = (2 * d**2 / n) * math.log2(n + 1) + g1
    g3 = (d**5 / n) * math.log2(2 * (n + 1)) + g2
    g4 = 2 * c1 * d / n + d * math.log2(n) / n
    g5 = -d * math.log2(n) / n + g3
    g6 = max(g4, g5)
    ph = math.nan if delta is None else phi(delta, c1, d, strict=strict)
    return Gammas(g1, g2, g3, g4, g5, g6, g7, ph, max(g1, g2, g3, g4, g5, g6, g7))


def gamma_functions(ctx: BoundContext) -> Gammas:
    """The gamma record for a context; rejects delta outside (0, 1/2)."""
    return gammas(ctx.n, ctx.d_A, ctx.d_B, ctx.c1, ctx.delta, strict=True)


def hypothesis_met(ctx: BoundContext) -> bool:
    """True when the asymptotic derivations' explicit hypotheses hold at this n."""
    return gamma1_hypothesis(ctx.n, ctx.d) and 0 < ctx.delta < 0.5 and ctx.eps > 0


def pinsker_exponents(distance: float) -> dict[str, float]:
    """The valid Pinsker exponent distance^2/(2 ln 2) next to the 2 distance^2 used in the Lemma 2 chain."""
    return {"pinsker": distance**2 / (2 * LN2), "claimed": 2 * distance**2}
