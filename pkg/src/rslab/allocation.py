"""OCBA allocation fractions.

The same formula serves the plug-in fractions (sample means and standard
deviations) and the asymptotic fractions (true parameters)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

GAP_FLOOR = 1e-12
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class FractionOutput:
    best_index: int
    betas: np.ndarray
    alphas: np.ndarray


@nb.njit(cache=True)
def argmax_first(values):
    """Index of the maximum, smallest index on ties."""
    best = 0
    for i in range(1, values.shape[0]):
        if values[i] > values[best]:
            best = i
    return best


@nb.njit(cache=True)
def fractions_into(means, stds, betas, alphas):
    """Fill ``betas``/``alphas`` in place and return the index of the best mean.

    Mean gaps below ``GAP_FLOOR`` are clamped so ties stay finite.
    """
    k = means.shape[0]
    best = argmax_first(means)
    acc = 0.0
    for i in range(k):
        if i == best:
            continue
        gap = means[best] - means[i]
        if gap < GAP_FLOOR:
            gap = GAP_FLOOR
        inv = 1.0 / (gap * gap)
        b = stds[i] * stds[i] * inv
        betas[i] = b
        # beta_i^2 / s_i^2 == beta_i / gap^2
        acc += b * inv
    betas[best] = stds[best] * math.sqrt(acc)
    total = 0.0
    for i in range(k):
        total += betas[i]
    scale = 1.0 / total
    for i in range(k):
        alphas[i] = betas[i] * scale
    return best


def compute_fractions(means, stds) -> FractionOutput:
    """Allocation fractions for designs with the given means and standard deviations.

    Non-best designs get ``beta_i = s_i^2 / (m_best - m_i)^2``; the best gets
    ``beta_best = s_best * sqrt(sum_{i != best} beta_i^2 / s_i^2)``.  The
    returned ``alphas`` are the betas normalised to sum to one.
    """
    means = np.ascontiguousarray(means, dtype=float)
    stds = np.ascontiguousarray(stds, dtype=float)
    if means.ndim != 1 or means.shape != stds.shape:
        raise ValueError("means and stds must be 1-D arrays of equal length")
    if means.shape[0] < 2:
        raise ValueError("need at least two designs")
    if not np.all(np.isfinite(means)):
        raise ValueError("means must be finite")
    if not np.all(stds > 0):
        raise ValueError("standard deviations must be strictly positive")
    betas = np.empty_like(means)
    alphas = np.empty_like(means)
    best = fractions_into(means, stds, betas, alphas)
    return FractionOutput(int(best), betas, alphas)
