"""Shared numerical primitives: online moments, normal/chi-square distribution
functions, Bernoulli KL divergence and tail bounds for the sample standard
deviation of normal data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "DesignState",
    "TailBoundQuery",
    "update",
    "normal_cdf",
    "normal_sf",
    "gaussian_tail_bounds",
    "bernoulli_kl",
    "sd_tail_upper_bounds",
    "sd_left_tail_upper_bound",
    "sd_right_tail_upper_bound",
    "sd_left_tail_lower_bound",
    "chi2_cdf",
    "chi2_sf",
    "sample_sd_cdf",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DesignState:
    """Running statistics for one design: run count, sample mean and the sum of
    squared deviations from the mean (``m2``)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        if self.m2 < 0:
            raise ValueError("m2 must be nonnegative")

    @property
    def variance(self) -> float:
        """Unbiased sample variance; needs at least two samples."""
        if self.count < 2:
            raise ValueError("sample variance needs count >= 2")
        return self.m2 / (self.count - 1)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def update(self, sample: float) -> DesignState:
        return update(self, sample)

    @classmethod
    def from_samples(cls, samples) -> DesignState:
        state = cls()
        for x in samples:
            state = update(state, float(x))
        return state


def update(state: DesignState, sample: float) -> DesignState:
    """Fold one sample into ``state`` (Welford's recurrence)."""
    n = state.count + 1
    delta = sample - state.mean
    mean = state.mean + delta / n
    m2 = state.m2 + delta * (sample - mean)
    if n == 1:
        m2 = 0.0
    return DesignState(n, mean, max(m2, 0.0))


def normal_cdf(z):
    """Standard normal CDF. Accepts scalars or arrays.

    Far in the lower tail the value is taken from ``log_ndtr`` so it stays
    positive down to the subnormal range.
    """
    z = np.asarray(z, dtype=float)
    out = special.ndtr(z)
    tail = z < -37.0
    if np.any(tail):
        out = np.where(tail, np.exp(special.log_ndtr(np.where(tail, z, 0.0))), out)
    return float(out) if np.ndim(out) == 0 else out


def normal_sf(z):
    """Upper tail ``1 - Phi(z)`` without cancellation."""
    return normal_cdf(-np.asarray(z, dtype=float))


def gaussian_tail_bounds(x: float) -> tuple[float, float]:
    """Mills-ratio bracket ``(lower, upper)`` around ``P(Z > x)`` for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    e = math.exp(-0.5 * x * x)
    lower = x / (x * x + 1.0) * _INV_SQRT_2PI * e
    return lower, e


def bernoulli_kl(alpha, p):
    """KL divergence between Bernoulli(alpha) and Bernoulli(p).

    The boundary values alpha in {0, 1} use the limits 0 log 0 = 0, so
    ``kl(0, p) = -log(1 - p)`` and ``kl(1, p) = -log(p)``.
    """
    a = np.asarray(alpha, dtype=float)
    q = np.asarray(p, dtype=float)
    if np.any((q <= 0) | (q >= 1)) or np.any(np.isnan(q)):
        raise ValueError("p must lie strictly inside (0, 1)")
    if np.any((a < 0) | (a > 1)) or np.any(np.isnan(a)):
        raise ValueError("alpha must lie in [0, 1]")
    out = special.xlogy(a, a / q) + special.xlogy(1.0 - a, (1.0 - a) / (1.0 - q))
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TailBoundQuery:
    n: int
    sigma: float
    x: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.x > 0:
            raise ValueError("x must be positive")


def sd_left_tail_upper_bound(n: int, sigma: float, x: float) -> float:
    """Upper bound on ``P(S_n <= sigma - x)`` for ``0 < x < sigma``."""
    q = TailBoundQuery(n, sigma, x)
    if q.x >= q.sigma:
        raise ValueError("left-tail bound needs x < sigma")
    r = (q.sigma - q.x) / q.sigma
    return math.exp(-(q.n - 1) / 4.0 * (1.0 - r * r) ** 2)


def sd_right_tail_upper_bound(n: int, sigma: float, x: float) -> float:
    """Upper bound on ``P(S_n >= sigma + x)`` for ``x > 0``."""
    q = TailBoundQuery(n, sigma, x)
    return math.exp(-(q.n - 1) * q.x * q.x / (4.0 * q.sigma * q.sigma))


def sd_tail_upper_bounds(q: TailBoundQuery) -> tuple[float, float]:
    """Both tail bounds for the sample standard deviation at deviation ``q.x``."""
    return (
        sd_left_tail_upper_bound(q.n, q.sigma, q.x),
        sd_right_tail_upper_bound(q.n, q.sigma, q.x),
    )


def sd_left_tail_lower_bound(n: int, sigma: float, a: float, b: float) -> float:
    """Polynomial lower bound ``(K_b a)^(n-1)`` on ``P(S_n <= a)``, ``0 < a < b``.

    ``K_b = 2 exp(-b^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`` lower-bounds the
    density of ``|Z|`` on ``[0, b / sigma]``.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    k_b = 2.0 * math.exp(-b * b / (2.0 * sigma * sigma)) * _INV_SQRT_2PI / sigma
    return (k_b * a) ** (n - 1)


def chi2_cdf(dof, x):
    """Chi-square CDF as the regularized lower incomplete gamma ``P(dof/2, x/2)``."""
    dof = np.asarray(dof, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(dof < 1):
        raise ValueError("dof must be >= 1")
    out = special.gammainc(dof / 2.0, np.maximum(x, 0.0) / 2.0)
    return float(out) if out.ndim == 0 else out


def chi2_sf(dof, x):
    """Chi-square survival function, accurate in the far right tail."""
    dof = np.asarray(dof, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(dof < 1):
        raise ValueError("dof must be >= 1")
    out = special.gammaincc(dof / 2.0, np.maximum(x, 0.0) / 2.0)
    return float(out) if out.ndim == 0 else out


def sample_sd_cdf(n: int, sigma: float, s: float) -> float:
    """Exact ``P(S_n <= s)`` using ``(n-1) S_n^2 / sigma^2 ~ chi2(n-1)``."""
    return chi2_cdf(n - 1, (n - 1) * s * s / (sigma * sigma))
