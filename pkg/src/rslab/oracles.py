"""Exact false-selection probabilities of the two-design static policies and the
density of the phase-I fraction estimate.

Design 1 is the better design throughout: its mean exceeds design 2's by
``delta > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy import special, stats

from ._validation import InfeasibleBudget, check_int, check_open_unit, check_positive
from .policies.estimators import floor_product, linear_n0

__all__ = [
    "TwoDesignParams",
    "pfs_counts",
    "pfs_ds",
    "pfs_rs",
    "phat_density",
    "phat_cdf",
    "pfs_two_phase",
    "adaptive_simpson",
]

@dataclass(frozen=True)
class TwoDesignParams:
    delta: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        check_positive(self.delta, "delta")
        check_positive(self.sigma1, "sigma1")
        check_positive(self.sigma2, "sigma2")

    @property
    def optimal_fraction(self) -> float:
        """``sigma1 / (sigma1 + sigma2)``."""
        return self.sigma1 / (self.sigma1 + self.sigma2)


def pfs_counts(params: TwoDesignParams, n1, n2):
    """``P(mean_1 < mean_2)`` with ``n1`` and ``n2`` runs; broadcasts over arrays."""
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    if np.any(n1 < 1) or np.any(n2 < 1):
        raise ValueError("both designs need at least one run")
    scale = np.sqrt(params.sigma1**2 / n1 + params.sigma2**2 / n2)
    out = special.ndtr(-params.delta / scale)
    return float(out) if out.ndim == 0 else out


def pfs_ds(params: TwoDesignParams, p: float, T: int) -> float:
    """False selection of the deterministic static split ``(floor(pT), floor((1-p)T))``."""
    p = check_open_unit(p, "p")
    T = check_int(T, "T", 1)
    n1, n2 = floor_product(p * T), floor_product((1.0 - p) * T)
    if n1 < 1 or n2 < 1:
        raise InfeasibleBudget(f"allocation ({n1}, {n2}) leaves a design empty")
    return pfs_counts(params, n1, n2)


def pfs_rs(params: TwoDesignParams, p: float, T: int) -> float:
    """False selection of the randomised static policy.

    With ``k ~ Binomial(T, p)`` decisions for design 1 the counts are
    ``(k + 1, T - k + 1)``; the mixture is summed with binomial weights
    evaluated in log space.
    """
    p = check_open_unit(p, "p")
    T = check_int(T, "T", 0)
    k = np.arange(T + 1)
    weights = np.exp(stats.binom.logpmf(k, T, p))
    terms = pfs_counts(params, k + 1, T - k + 1)
    return float(min(1.0, max(0.0, math.fsum(np.atleast_1d(weights * terms)))))


def _log_norm_const(n0: int) -> float:
    return math.log(2.0) + math.lgamma(n0 - 1.0) - 2.0 * math.lgamma((n0 - 1.0) / 2.0)


def phat_density(p, n0: int, sigma1: float, sigma2: float):
    """Density of ``S_1 / (S_1 + S_2)`` when both standard deviations come from
    ``n0`` normal runs; zero outside ``[0, 1]``."""
    n0 = check_int(n0, "n0", 2)
    check_positive(sigma1, "sigma1")
    check_positive(sigma2, "sigma2")
    p = np.asarray(p, dtype=float)
    inside = (p >= 0.0) & (p <= 1.0)
    q = np.where(inside, p, 0.5)
    log_f = (
        _log_norm_const(n0)
        + special.xlogy(n0 - 2.0, q * (1.0 - q))
        + (n0 - 1.0) * (math.log(sigma1 * sigma2)
                        - np.log((1.0 - q) ** 2 * sigma1**2 + q**2 * sigma2**2))
    )
    out = np.where(inside, np.exp(log_f), 0.0)
    return float(out) if out.ndim == 0 else out


def phat_cdf(t, n0: int, sigma1: float, sigma2: float):
    """Exact ``P(S_1 / (S_1 + S_2) <= t)`` through the F distribution:
    ``S_1^2 / S_2^2 = (sigma1^2 / sigma2^2) F(n0 - 1, n0 - 1)``."""
    n0 = check_int(n0, "n0", 2)
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        ratio = np.where(t < 1.0, t / (1.0 - t), np.inf)
    x = ratio**2 * sigma2**2 / sigma1**2
    out = stats.f.cdf(x, n0 - 1, n0 - 1)
    return float(out) if out.ndim == 0 else out


def _phat_quantiles(levels, n0, sigma1, sigma2):
    q = stats.f.ppf(levels, n0 - 1, n0 - 1)
    r = sigma1 / sigma2 * np.sqrt(q)
    return r / (1.0 + r)


@nb.njit
def _density(p, args):
    n0, s1, s2, log_c = args
    if p <= 0.0 or p >= 1.0:
        if n0 > 2:
            return 0.0
        return math.exp(log_c) * (s1 * s2 / (s2 * s2 if p >= 1.0 else s1 * s1))
    log_f = (log_c + (n0 - 2.0) * math.log(p * (1.0 - p))
             + (n0 - 1.0) * (math.log(s1 * s2)
                             - math.log((1.0 - p) ** 2 * s1 * s1 + p * p * s2 * s2)))
    return math.exp(log_f)


@nb.njit
def _adaptive_simpson(f, args, a, b, tol, min_depth, max_depth):
    fa = f(a, args)
    fb = f(b, args)
    m = 0.5 * (a + b)
    fm = f(m, args)
    size = 2 * max_depth + 4
    st_a = np.empty(size)
    st_b = np.empty(size)
    st_fa = np.empty(size)
    st_fm = np.empty(size)
    st_fb = np.empty(size)
    st_whole = np.empty(size)
    st_tol = np.empty(size)
    st_depth = np.empty(size, dtype=np.int64)
    top = 0
    st_a[0] = a
    st_b[0] = b
    st_fa[0] = fa
    st_fm[0] = fm
    st_fb[0] = fb
    st_whole[0] = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    st_tol[0] = tol
    st_depth[0] = 0
    top = 1
    total = 0.0
    while top > 0:
        top -= 1
        a, b = st_a[top], st_b[top]
        fa, fm, fb = st_fa[top], st_fm[top], st_fb[top]
        whole, eps, depth = st_whole[top], st_tol[top], st_depth[top]
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm, args)
        frm = f(rm, args)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        diff = left + right - whole
        if depth >= max_depth or (depth >= min_depth and abs(diff) <= 15.0 * eps):
            total += left + right + diff / 15.0
            continue
        st_a[top], st_b[top] = m, b
        st_fa[top], st_fm[top], st_fb[top] = fm, frm, fb
        st_whole[top], st_tol[top], st_depth[top] = right, 0.5 * eps, depth + 1
        top += 1
        st_a[top], st_b[top] = a, m
        st_fa[top], st_fm[top], st_fb[top] = fa, flm, fm
        st_whole[top], st_tol[top], st_depth[top] = left, 0.5 * eps, depth + 1
        top += 1
    return total


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, args=(),
                     min_depth: int = 2, max_depth: int = 40) -> float:
    """Adaptive Simpson integral of a numba-compiled ``f(x, args)`` over ``[a, b]``
    with absolute tolerance ``tol`` (Richardson-corrected)."""
    return float(_adaptive_simpson(f, args, float(a), float(b), float(tol),
                                   int(min_depth), int(max_depth)))


@nb.njit
def _density_pieces(edges, args, weights, rel_tol, scale, min_depth, max_depth):
    total = 0.0
    for j in range(edges.shape[0] - 1):
        a, b = edges[j], edges[j + 1]
        w = weights[j]
        if w <= 0.0 or b <= a:
            continue
        eps = rel_tol * scale * (b - a) / w
        total += w * _adaptive_simpson(_density, args, a, b, eps, min_depth, max_depth)
    return total


def pfs_two_phase(params: TwoDesignParams, alpha0: float, T: int, rtol: float = 1e-10) -> float:
    """False selection of the two-phase policy, integrating over the phase-I
    fraction estimate.

    Between consecutive floor breakpoints ``p = k / ((1 - alpha0) T)`` (and
    their mirror images) both phase-II counts are constant, so each piece
    contributes a constant normal probability times the integral of the
    density, which is computed by adaptive Simpson.
    """
    alpha0 = check_open_unit(alpha0, "alpha0")
    T = check_int(T, "T", 1)
    n0 = linear_n0(alpha0, T, 2)
    if n0 < 2:
        raise InfeasibleBudget(f"phase-I size {n0} < 2")
    s1, s2 = params.sigma1, params.sigma2
    c = (1.0 - alpha0) * T
    ks = np.arange(1, int(math.floor(c)) + 1) / c
    levels = np.array([1e-14, 1e-10, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.25, 0.5])
    levels = np.concatenate([levels, 1.0 - levels[::-1][1:]])
    extra = _phat_quantiles(levels, n0, s1, s2)
    edges = np.unique(np.concatenate([[0.0, 1.0], ks, 1.0 - ks, extra]))
    edges = edges[(edges >= 0.0) & (edges <= 1.0)]
    mid = 0.5 * (edges[:-1] + edges[1:])
    n1 = np.floor((1.0 - alpha0) * mid * T) + 1.0
    n2 = np.floor((1.0 - alpha0) * (1.0 - mid) * T) + 1.0
    weights = np.asarray(pfs_counts(params, n1, n2), dtype=float)
    args = (float(n0), float(s1), float(s2), _log_norm_const(n0))
    # coarse pass fixes the scale of the tolerance
    coarse = _density_pieces(edges, args, weights, 1e-3, 1.0, 1, 3)
    scale = coarse if coarse > 0 else 1e-300
    value = _density_pieces(edges, args, weights, rtol, scale, 2, 40)
    return float(min(1.0, max(0.0, value)))
