"""Compiled single-replication policy loops and the batch driver.

Samples come either from a pre-generated standard-normal block ``z[i, r]``
(shape ``(K, cap)``) or, when ``z`` is ``None``, straight from the
counter-based generator.  Decision uniforms work the same way with ``u``.
Either way run ``r`` of design ``i`` is ``mu[i] + sigma[i] * Z(seed, rep, i, r)``.
The ``is None`` tests are resolved at compile time, so each source gets its
own specialisation (an untaken generator branch in the block version costs
several times the sampling work itself).
"""

import math

import numba as nb
import numpy as np

from ..allocation import STD_FLOOR, argmax_first, fractions_into
from ..rng import DECISION, std_normal_at, uniform_at

OCBA = 0
OCBA_D = 1
OCBA_R = 2
EA = 3
DS = 4
RS = 5
TWO_PHASE = 6

_DECISION = np.uint64(DECISION)


@nb.njit
def _draw(z, seed, rep, mu, sigma, i, r):
    if z is None:
        v = std_normal_at(seed, rep, np.uint64(i), np.uint64(r))
    else:
        v = z[i, r]
    return mu[i] + sigma[i] * v


@nb.njit
def _decision(u, seed, rep, step):
    if u is None:
        return uniform_at(seed, rep, _DECISION, np.uint64(step))
    return u[step]


@nb.njit(inline="always")
def _add(i, x, count, mean, m2):
    n = count[i] + 1
    d = x - mean[i]
    mean[i] += d / n
    m2[i] += d * (x - mean[i])
    count[i] = n


@nb.njit
def _sample_n(i, n, z, seed, rep, mu, sigma, count, mean, m2):
    for _ in range(n):
        _add(i, _draw(z, seed, rep, mu, sigma, i, count[i]), count, mean, m2)


@nb.njit(inline="always")
def _refresh_std(i, count, m2, stds):
    s = math.sqrt(m2[i] / (count[i] - 1))
    stds[i] = s if s > STD_FLOOR else STD_FLOOR


@nb.njit
def _plug_in(count, mean, m2, stds, betas, alphas):
    for i in range(count.shape[0]):
        _refresh_std(i, count, m2, stds)
    fractions_into(mean, stds, betas, alphas)


@nb.njit
def _record(trace, row, count, alphas, tr_counts, tr_fracs):
    if trace:
        for i in range(count.shape[0]):
            tr_counts[row, i] = count[i]
            tr_fracs[row, i] = alphas[i]


@nb.njit
def _most_starving(count, alphas):
    """argmax of ``alphas[i] / count[i]``, smallest index on ties."""
    best = 0
    for i in range(1, count.shape[0]):
        # cross-multiplied to keep divisions out of the per-run loop
        if alphas[i] * count[best] > alphas[best] * count[i]:
            best = i
    return best


@nb.njit
def _by_cumsum(uval, alphas):
    """Smallest ``k`` with ``uval <= alphas[0] + ... + alphas[k]``."""
    acc = 0.0
    k = alphas.shape[0]
    for i in range(k):
        acc += alphas[i]
        if uval <= acc:
            return i
    # cumulative sum can fall short of 1 by rounding
    return k - 1


@nb.njit
def _ocba(z, u, seed, rep, mu, sigma, T, n0, delta, exhaust,
          count, mean, m2, trace, tr_counts, tr_fracs):
    k = mu.shape[0]
    stds = np.empty(k)
    betas = np.empty(k)
    alphas = np.empty(k)
    deficit = np.empty(k, dtype=np.int64)
    done = np.empty(k, dtype=np.bool_)
    for i in range(k):
        _sample_n(i, n0, z, seed, rep, mu, sigma, count, mean, m2)
    total = k * n0
    t_virtual = k * n0 + delta
    rows = 0
    while total < T and t_virtual <= T:
        _plug_in(count, mean, m2, stds, betas, alphas)
        for i in range(k):
            target = int(math.floor(alphas[i] * t_virtual))
            deficit[i] = target - count[i] if target > count[i] else 0
            done[i] = False
        # largest deficit first, so truncation at T hits the smallest requests
        for _ in range(k):
            j = -1
            for i in range(k):
                if not done[i] and (j < 0 or deficit[i] > deficit[j]):
                    j = i
            done[j] = True
            n = deficit[j]
            if n > T - total:
                n = T - total
            if n > 0:
                _sample_n(j, n, z, seed, rep, mu, sigma, count, mean, m2)
                total += n
        _record(trace, rows, count, alphas, tr_counts, tr_fracs)
        rows += 1
        t_virtual += delta
    if exhaust and total < T:
        _plug_in(count, mean, m2, stds, betas, alphas)
        while total < T:
            j = _most_starving(count, alphas)
            _sample_n(j, 1, z, seed, rep, mu, sigma, count, mean, m2)
            total += 1
            _record(trace, rows, count, alphas, tr_counts, tr_fracs)
            rows += 1
            _refresh_std(j, count, m2, stds)
            fractions_into(mean, stds, betas, alphas)
    return rows


@nb.njit
def _ocba_sequential(z, u, seed, rep, mu, sigma, T, n0, randomized,
                     count, mean, m2, trace, tr_counts, tr_fracs):
    k = mu.shape[0]
    stds = np.empty(k)
    betas = np.empty(k)
    alphas = np.empty(k)
    for i in range(k):
        _sample_n(i, n0, z, seed, rep, mu, sigma, count, mean, m2)
    total = k * n0
    step = 0
    _plug_in(count, mean, m2, stds, betas, alphas)
    while total < T:
        if randomized:
            j = _by_cumsum(_decision(u, seed, rep, step), alphas)
        else:
            j = _most_starving(count, alphas)
        _sample_n(j, 1, z, seed, rep, mu, sigma, count, mean, m2)
        total += 1
        _record(trace, step, count, alphas, tr_counts, tr_fracs)
        _refresh_std(j, count, m2, stds)
        fractions_into(mean, stds, betas, alphas)
        step += 1
    return step


@nb.njit
def _static(z, seed, rep, mu, sigma, alloc, count, mean, m2):
    for i in range(mu.shape[0]):
        _sample_n(i, alloc[i], z, seed, rep, mu, sigma, count, mean, m2)


@nb.njit
def _randomized_static(z, u, seed, rep, mu, sigma, T, p, count, mean, m2):
    ones = 0
    for step in range(T):
        if _decision(u, seed, rep, step) < p:
            ones += 1
    _sample_n(0, ones + 1, z, seed, rep, mu, sigma, count, mean, m2)
    _sample_n(1, T - ones + 1, z, seed, rep, mu, sigma, count, mean, m2)


@nb.njit
def _two_phase(z, seed, rep, mu, sigma, T, n0, alpha0, count, mean, m2):
    _sample_n(0, n0, z, seed, rep, mu, sigma, count, mean, m2)
    _sample_n(1, n0, z, seed, rep, mu, sigma, count, mean, m2)
    s1 = math.sqrt(m2[0] / (n0 - 1))
    s2 = math.sqrt(m2[1] / (n0 - 1))
    phat = s1 / (s1 + s2) if s1 + s2 > 0 else 0.5
    n1 = int(math.floor((1.0 - alpha0) * phat * T)) + 1
    n2 = int(math.floor((1.0 - alpha0) * (1.0 - phat) * T)) + 1
    # phase II starts fresh: new statistics, run indices continue past n0
    for i in range(2):
        mean[i] = 0.0
        m2[i] = 0.0
    for i, n in ((0, n1), (1, n2)):
        for r in range(n0, n0 + n):
            x = _draw(z, seed, rep, mu, sigma, i, r)
            c = r - n0 + 1
            d = x - mean[i]
            mean[i] += d / c
            m2[i] += d * (x - mean[i])
        count[i] = n
    return phat


@nb.njit
def run_one(kind, z, u, seed, rep, mu, sigma, T, n0, delta, exhaust, p, alpha0,
            count, mean, m2, trace, tr_counts, tr_fracs):
    """One replication of policy ``kind``; returns the number of trace rows."""
    k = mu.shape[0]
    for i in range(k):
        count[i] = 0
        mean[i] = 0.0
        m2[i] = 0.0
    if kind == OCBA:
        return _ocba(z, u, seed, rep, mu, sigma, T, n0, delta, exhaust,
                     count, mean, m2, trace, tr_counts, tr_fracs)
    if kind == OCBA_D or kind == OCBA_R:
        return _ocba_sequential(z, u, seed, rep, mu, sigma, T, n0, kind == OCBA_R,
                                count, mean, m2, trace, tr_counts, tr_fracs)
    if kind == EA:
        alloc = np.empty(k, dtype=np.int64)
        for i in range(k):
            alloc[i] = T // k + (1 if i < T % k else 0)
        _static(z, seed, rep, mu, sigma, alloc, count, mean, m2)
        return 0
    if kind == DS:
        alloc = np.empty(2, dtype=np.int64)
        alloc[0] = n0
        alloc[1] = delta
        _static(z, seed, rep, mu, sigma, alloc, count, mean, m2)
        return 0
    if kind == RS:
        _randomized_static(z, u, seed, rep, mu, sigma, T, p, count, mean, m2)
        return 0
    if kind == TWO_PHASE:
        _two_phase(z, seed, rep, mu, sigma, T, n0, alpha0, count, mean, m2)
        return 0
    raise ValueError("unknown policy kind")


@nb.njit
def _batch(kind, zs, us, seed, reps, mu, sigma, T, n0, delta, exhaust, p, alpha0,
           selected, counts, means, on_demand_z, on_demand_u):
    k = mu.shape[0]
    count = np.empty(k, dtype=np.int64)
    mean = np.empty(k)
    m2 = np.empty(k)
    tr_counts = np.empty((0, k), dtype=np.int64)
    tr_fracs = np.empty((0, k))
    for a in range(reps.shape[0]):
        rep = np.uint64(reps[a])
        if on_demand_z is None:
            if on_demand_u is None:
                run_one(kind, zs[a], us[a], seed, rep, mu, sigma, T, n0, delta, exhaust,
                        p, alpha0, count, mean, m2, False, tr_counts, tr_fracs)
            else:
                run_one(kind, zs[a], None, seed, rep, mu, sigma, T, n0, delta, exhaust,
                        p, alpha0, count, mean, m2, False, tr_counts, tr_fracs)
        else:
            run_one(kind, None, None, seed, rep, mu, sigma, T, n0, delta, exhaust,
                    p, alpha0, count, mean, m2, False, tr_counts, tr_fracs)
        selected[a] = argmax_first(mean)
        for i in range(k):
            counts[a, i] = count[i]
            means[a, i] = mean[i]


def run_batch(kind, zs, us, seed, reps, mu, sigma, T, n0, delta, exhaust, p, alpha0,
              selected, counts, means):
    """Replications ``reps[a]`` in turn.  ``zs`` (``(R, K, cap)``) and ``us``
    (``(R, cap)``) are per-replication blocks; ``None`` generates on demand
    (a ``None`` ``zs`` implies on-demand decisions too)."""
    k = mu.shape[0]
    if zs is None:
        zs_arg = np.empty((1, k, 1))
        us_arg = np.empty((1, 1))
        _batch(kind, zs_arg, us_arg, seed, reps, mu, sigma, T, n0, delta, exhaust, p, alpha0,
               selected, counts, means, True, True)
    elif us is None:
        _batch(kind, zs, np.empty((1, 1)), seed, reps, mu, sigma, T, n0, delta, exhaust, p,
               alpha0, selected, counts, means, None, True)
    else:
        _batch(kind, zs, us, seed, reps, mu, sigma, T, n0, delta, exhaust, p, alpha0,
               selected, counts, means, None, None)
