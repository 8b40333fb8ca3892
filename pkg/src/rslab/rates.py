"""Large-deviations rates of the two-design static policies and analytical PFS
bounds.

Rates are exponents per unit budget: ``PFS(T) ~ exp(-rate * T)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from . import stats as rs_stats
from ._validation import InfeasibleBudget, check_int, check_open_unit
from .oracles import TwoDesignParams
from .policies.base import ProblemInstance
from .policies.estimators import check_alpha0, linear_n0

__all__ = [
    "RateResult",
    "golden_section",
    "rate_ds",
    "optimal_rate_ds",
    "rate_ea",
    "rate_rs",
    "rate_rs_objective",
    "rate_two_phase",
    "rate_two_phase_objective",
    "finite_sample_upper_bound",
    "upper_bound_for_n0",
    "variance_driven_lower_bound",
    "DecayFit",
    "empirical_ld_rate",
    "empirical_ld_rate_from_log",
    "RobustnessReport",
    "ea_robustness_check",
]

GRID_POINTS = 2048
BRACKET_TOL = 1e-10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_EDGE = 1e-9


@dataclass(frozen=True)
class RateResult:
    rate: float
    minimizer: float
    bracket_width: float
    evaluations: int


def golden_section(f, a: float, b: float, tol: float = BRACKET_TOL, max_iter: int = 200):
    """Minimise a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x), final bracket width, evaluations)``; ``x`` is the best
    point evaluated.
    """
    if not b > a:
        raise ValueError("need a < b")
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        evals += 1
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return x, fx, b - a, evals


def _grid_then_refine(objective, lo: float, hi: float, extra=()) -> RateResult:
    """Global grid search followed by golden-section refinement of the best cell.

    ``objective`` must accept arrays.  ``extra`` are further candidate points.
    """
    grid = np.linspace(lo, hi, GRID_POINTS)
    values = np.asarray(objective(grid), dtype=float)
    j = int(np.argmin(values))
    a = grid[max(j - 1, 0)]
    b = grid[min(j + 1, GRID_POINTS - 1)]
    x, fx, width, evals = golden_section(lambda t: float(objective(t)), a, b)
    best_x, best_f = x, fx
    candidates = [(grid[j], values[j])] + [(float(t), float(objective(t))) for t in extra]
    for t, v in candidates:
        if v < best_f:
            best_x, best_f = t, v
    return RateResult(max(float(best_f), 0.0), float(best_x), float(width),
                      GRID_POINTS + evals + len(extra))


def _ds_rate_at(params: TwoDesignParams, a):
    """``delta^2 / (2 (s1^2/a + s2^2/(1-a)))`` written so ``a`` in {0, 1} gives 0."""
    a = np.asarray(a, dtype=float)
    s1, s2 = params.sigma1**2, params.sigma2**2
    out = params.delta**2 * a * (1.0 - a) / (2.0 * (s1 * (1.0 - a) + s2 * a))
    return float(out) if out.ndim == 0 else out


def rate_ds(params: TwoDesignParams, p: float) -> float:
    """Rate of the deterministic static split with fraction ``p`` to design 1."""
    p = check_open_unit(p, "p")
    return params.delta**2 / (2.0 * (params.sigma1**2 / p + params.sigma2**2 / (1.0 - p)))


def optimal_rate_ds(params: TwoDesignParams) -> RateResult:
    """Best static rate, attained at ``p* = sigma1 / (sigma1 + sigma2)``."""
    rate = params.delta**2 / (2.0 * (params.sigma1 + params.sigma2) ** 2)
    return RateResult(rate, params.optimal_fraction, 0.0, 0)


def rate_ea(params: TwoDesignParams) -> float:
    """Rate of equal allocation."""
    return params.delta**2 / (4.0 * (params.sigma1**2 + params.sigma2**2))


def rate_rs_objective(params: TwoDesignParams, p: float, alpha):
    """Static rate at fraction ``alpha`` plus ``KL(alpha || p)``."""
    return _ds_rate_at(params, alpha) + rs_stats.bernoulli_kl(alpha, p)


def rate_rs(params: TwoDesignParams, p: float) -> RateResult:
    """Rate of the randomised static policy: infimum over realised fractions
    ``alpha`` of the static rate plus the cost of observing ``alpha``.

    The objective is not convex in general, so a grid over ``[0, 1]``
    (endpoints included) selects the cell that is then refined.
    """
    p = check_open_unit(p, "p")
    res = _grid_then_refine(lambda a: rate_rs_objective(params, p, a), 0.0, 1.0)
    # closed forms at alpha = p, 0 and 1; the two spellings of -log(1-p) differ
    # only by rounding
    best_f, best_x = res.rate, res.minimizer
    for x, v in ((p, rate_ds(params, p)), (0.0, min(-math.log1p(-p), -math.log(1.0 - p))),
                 (1.0, -math.log(p))):
        if v < best_f:
            best_f, best_x = v, x
    return RateResult(best_f, best_x, res.bracket_width, res.evaluations + 3)


def rate_two_phase_objective(params: TwoDesignParams, alpha0: float, p):
    """Phase-II static rate at ``p`` plus the phase-I cost of estimating ``p``."""
    p = np.asarray(p, dtype=float)
    s1, s2 = params.sigma1, params.sigma2
    first = (1.0 - alpha0) * _ds_rate_at(params, p)
    with np.errstate(divide="ignore"):
        second = 0.5 * alpha0 * np.log(((1.0 - p) ** 2 * s1 * s1 + p * p * s2 * s2)
                                       / (2.0 * p * (1.0 - p) * s1 * s2))
    out = first + second
    return float(out) if out.ndim == 0 else out


def rate_two_phase(params: TwoDesignParams, alpha0: float) -> RateResult:
    """Rate of the two-phase policy with phase-I share ``alpha0``.

    The objective diverges at both ends, so the search runs over
    ``[1e-9, 1 - 1e-9]``.
    """
    alpha0 = check_open_unit(alpha0, "alpha0")
    return _grid_then_refine(lambda t: rate_two_phase_objective(params, alpha0, t),
                             _EDGE, 1.0 - _EDGE, extra=(params.optimal_fraction,))


def upper_bound_for_n0(instance: ProblemInstance, n0: int) -> float:
    """Geometric-sum PFS bound for any policy that gives every design at least
    ``n0`` runs and selects the largest sample mean.

    With means sorted decreasingly, ``delta = mu_1 - mu_2`` and
    ``dbar_i = mu_2 - mu_i + delta / 2``, the bound is
    ``e^{-delta^2 n0 / (8 s_1^2)} / (1 - e^{-delta^2 / (8 s_1^2)})
    + sum_{i>=2} e^{-dbar_i^2 n0 / (2 s_i^2)} / (1 - e^{-dbar_i^2 / (2 s_i^2)})``.
    """
    instance.require_unique_best()
    n0 = check_int(n0, "n0", 1)
    order = np.argsort(-instance.means, kind="stable")
    mu = instance.means[order]
    sd = instance.stds[order]
    delta = mu[0] - mu[1]
    rates = [delta**2 / (8.0 * sd[0] ** 2)]
    rates += [(mu[1] - mu[i] + 0.5 * delta) ** 2 / (2.0 * sd[i] ** 2)
              for i in range(1, mu.shape[0])]
    total = math.fsum(math.exp(-c * n0) / -math.expm1(-c) for c in rates)
    return min(1.0, total)


def finite_sample_upper_bound(instance: ProblemInstance, alpha0: float, T: int,
                              n0_scope: str = "total") -> float:
    """PFS bound for the growing-``N0`` OCBA variants at budget ``T``.

    ``N0`` follows the same rule as the policies (:func:`linear_n0`).
    """
    alpha0 = check_alpha0(alpha0, instance.n_designs, n0_scope)
    T = check_int(T, "T", 1)
    n0 = linear_n0(alpha0, T, instance.n_designs, n0_scope)
    if n0 < 2:
        raise InfeasibleBudget(f"initial size {n0} < 2 at budget {T}")
    return upper_bound_for_n0(instance, n0)


def variance_driven_lower_bound(params: TwoDesignParams, T: int) -> float:
    """``1 - Phi(delta sqrt(T) / (sigma1 + sigma2))``: no two-design policy whose
    allocation depends only on variance estimates can have a smaller PFS."""
    T = check_int(T, "T", 4)
    x = params.delta * math.sqrt(T) / (params.sigma1 + params.sigma2)
    return rs_stats.normal_sf(x)


@dataclass(frozen=True)
class DecayFit:
    """Pointwise rates ``-log(pfs) / T`` and the two decay regressions."""

    rates: list
    slope_vs_t: float
    r2_vs_t: float
    slope_vs_log_t: float
    r2_vs_log_t: float

    @property
    def favours_polynomial(self) -> bool:
        return self.r2_vs_log_t > self.r2_vs_t


def empirical_ld_rate_from_log(curve) -> DecayFit:
    """As :func:`empirical_ld_rate` but for ``(T, log pfs)`` pairs, which
    stay finite far below the smallest double."""
    pts = [(int(t), float(v)) for t, v in curve]
    if len(pts) < 3:
        raise ValueError("need at least three budgets for the regressions")
    t = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts])
    if np.any(t <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("budgets must be positive and log-PFS finite")
    lin = linregress(t, y)
    loglog = linregress(np.log(t), y)
    return DecayFit(
        rates=[(int(ti), float(-yi / ti)) for ti, yi in zip(t, y)],
        slope_vs_t=float(lin.slope),
        r2_vs_t=float(lin.rvalue**2),
        slope_vs_log_t=float(loglog.slope),
        r2_vs_log_t=float(loglog.rvalue**2),
    )


def empirical_ld_rate(curve) -> DecayFit:
    """Rates and decay-shape regressions from ``(T, pfs)`` pairs; zero PFS
    values are rejected because they only signal too few replications."""
    pts = [(t, float(v)) for t, v in curve]
    if any(not v > 0 for _, v in pts):
        raise ValueError("pfs values must be positive; increase the replications")
    return empirical_ld_rate_from_log([(t, math.log(v)) for t, v in pts])


@dataclass(frozen=True)
class RobustnessReport:
    p_grid: np.ndarray
    worst_ratio: np.ndarray
    limit: np.ndarray

    @property
    def best_p(self) -> float:
        return float(self.p_grid[int(np.argmin(self.worst_ratio))])


def ea_robustness_check(sigma_grid, p_grid=None) -> RobustnessReport:
    """Worst-case ratio of a static split's variance term to the optimal one.

    For each ``p`` the ratio ``(s1^2/p + s2^2/(1-p)) / (s1 + s2)^2`` is
    maximised over the ``(s1, s2)`` pairs in ``sigma_grid``; ``limit`` holds
    ``max(1/p, 1/(1-p))``, its supremum over all positive pairs.
    """
    pairs = np.asarray(sigma_grid, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] == 0:
        raise ValueError("sigma_grid must be a non-empty list of (sigma1, sigma2) pairs")
    if not np.all(pairs > 0):
        raise ValueError("sigma values must be positive")
    if p_grid is None:
        p_grid = np.linspace(0.01, 0.99, 99)
    p = np.asarray(p_grid, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("p values must lie in (0, 1)")
    s1 = pairs[:, 0][None, :]
    s2 = pairs[:, 1][None, :]
    ratio = (s1**2 / p[:, None] + s2**2 / (1.0 - p[:, None])) / (s1 + s2) ** 2
    return RobustnessReport(p, ratio.max(axis=1), np.maximum(1.0 / p, 1.0 / (1.0 - p)))

