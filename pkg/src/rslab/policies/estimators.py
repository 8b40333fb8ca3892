"""Budget-allocation policies as scikit-learn style estimators.

Each policy is a :class:`~sklearn.base.BaseEstimator`, so ``get_params``,
``set_params`` and ``clone`` work.  ``fit(sampler, budget)`` executes one
replication and stores ``selected_``, ``counts_``, ``means_``,
``total_consumed_`` and ``trace_``; ``simulate`` runs many replications in
compiled code.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from .. import rng
from .._validation import InfeasibleBudget, check_int, check_open_unit
from . import _kernels as kern
from .base import BatchResult, PolicyRun, ProblemInstance, Sampler

# absorbs representation error in products such as 0.29 * 100 before flooring
_FLOOR_EPS = 1e-9

# replications per generated block in ``simulate``
CHUNK = 256


def floor_product(x: float) -> int:
    return int(math.floor(x + _FLOOR_EPS))


def linear_n0(alpha0: float, budget: int, n_designs: int, scope: str = "total") -> int:
    """Initial sample size of the growing-``N0`` variants.

    ``scope="total"`` spends a fraction ``alpha0`` of the budget on
    initialisation, ``N0 = floor(alpha0 T / K)``; ``scope="design"`` gives each
    design ``floor(alpha0 T)`` runs.
    """
    if scope == "total":
        return floor_product(alpha0 * budget / n_designs)
    if scope == "design":
        return floor_product(alpha0 * budget)
    raise ValueError(f"unknown n0 scope {scope!r}")


def check_alpha0(alpha0, n_designs: int, scope: str = "total") -> float:
    """``alpha0`` in ``(0, 1)``; with ``scope="design"`` in ``(0, 1/K]``, where
    ``1/K`` makes initialisation consume the whole budget."""
    if scope == "total":
        return check_open_unit(alpha0, "alpha0")
    value = float(alpha0)
    if not (0.0 < value and value * n_designs <= 1.0 + _FLOOR_EPS):
        raise ValueError(f"alpha0 must lie in (0, 1/{n_designs}] per design, got {value}")
    return value


class Policy(BaseEstimator):
    """Common driver; subclasses set ``_kind`` and implement ``_resolve``."""

    _kind = -1
    _two_designs_only = False

    @property
    def policy_id(self) -> str:
        raise NotImplementedError

    @property
    def n0_mode(self) -> str:
        return "none"

    def _resolve(self, budget: int, n_designs: int) -> tuple:
        """Kernel arguments ``(n0, delta, exhaust, p, alpha0)`` for this budget."""
        raise NotImplementedError

    def minimal_budget(self, n_designs: int) -> int:
        """Smallest feasible budget for ``n_designs`` designs."""
        t = 1
        while True:
            try:
                self._resolve(t, n_designs)
                return t
            except InfeasibleBudget:
                t += 1
                if t > 10**7:
                    raise

    def _check_designs(self, n_designs: int):
        if self._two_designs_only and n_designs != 2:
            raise ValueError(f"{self.policy_id} is defined for two designs only")

    def _args(self, budget, instance: ProblemInstance):
        budget = check_int(budget, "budget", 1)
        self._check_designs(instance.n_designs)
        n0, delta, exhaust, p, alpha0 = self._resolve(budget, instance.n_designs)
        return budget, (int(n0), int(delta), bool(exhaust), float(p), float(alpha0))

    def run(self, sampler: Sampler, budget: int, trace: bool = False) -> PolicyRun:
        """One replication driven by ``sampler``."""
        instance = sampler.instance
        budget, (n0, delta, exhaust, p, alpha0) = self._args(budget, instance)
        k = instance.n_designs
        cap = budget + 2
        z = np.ascontiguousarray(sampler.standard_block(cap), dtype=float)
        u = np.ascontiguousarray(sampler.decision_block(cap), dtype=float)
        if z.shape != (k, cap) or u.shape != (cap,):
            raise ValueError("sampler returned blocks of the wrong shape")
        count = np.zeros(k, dtype=np.int64)
        mean = np.zeros(k)
        m2 = np.zeros(k)
        rows = budget + 1 if trace else 0
        tr_counts = np.zeros((rows, k), dtype=np.int64)
        tr_fracs = np.zeros((rows, k))
        n_rows = kern.run_one(
            self._kind, z, u, np.uint64(sampler.master_seed), np.uint64(sampler.replication),
            instance.means, instance.stds, budget, n0, delta, exhaust, p, alpha0,
            count, mean, m2, trace, tr_counts, tr_fracs)
        history = None
        if trace:
            history = [(tr_counts[j].copy(), tr_fracs[j].copy()) for j in range(n_rows)]
        discarded = 2 * n0 if self._kind == kern.TWO_PHASE else 0
        return PolicyRun(
            selected=int(np.argmax(mean)),
            final_counts=count,
            total_consumed=int(count.sum()),
            final_means=mean,
            trace=history,
            discarded=discarded,
        )

    def fit(self, sampler: Sampler, budget: int, trace: bool = False):
        result = self.run(sampler, budget, trace=trace)
        self.run_ = result
        self.selected_ = result.selected
        self.counts_ = result.final_counts
        self.means_ = result.final_means
        self.total_consumed_ = result.total_consumed
        self.trace_ = result.trace
        return self

    def simulate(self, instance: ProblemInstance, budget: int, seed: int = 0,
                 replications=1000, on_demand: bool | None = None) -> BatchResult:
        """Many replications; ``replications`` is a count or explicit indices.

        Samples are identical to those :meth:`run` sees through ``Sampler``.
        With ``on_demand`` the draws are generated inside the loop instead of
        being materialised per chunk (the default for long two-design runs).
        """
        budget, args = self._args(budget, instance)
        reps = _replication_indices(replications)
        if on_demand is None:
            on_demand = instance.n_designs * (budget + 2) > 200_000
        k = instance.n_designs
        sel = np.empty(reps.shape[0], dtype=np.int64)
        counts = np.empty((reps.shape[0], k), dtype=np.int64)
        means = np.empty((reps.shape[0], k))
        seed = check_int(seed, "seed", 0)
        if on_demand:
            run_kernel(self._kind, args, instance, budget, seed, reps, None, None,
                       sel, counts, means)
        else:
            for lo in range(0, reps.shape[0], CHUNK):
                part = reps[lo:lo + CHUNK]
                z = rng.normal_block(seed, part, k, budget + 2)
                u = rng.uniform_block(seed, part, budget + 2)
                run_kernel(self._kind, args, instance, budget, seed, part, z, u,
                           sel[lo:lo + CHUNK], counts[lo:lo + CHUNK], means[lo:lo + CHUNK])
        return BatchResult(reps, sel, counts, means)


def _replication_indices(replications) -> np.ndarray:
    if np.ndim(replications) == 0:
        n = check_int(replications, "replications", 1)
        return np.arange(n, dtype=np.uint64)
    reps = np.asarray(replications)
    if reps.ndim != 1 or reps.size == 0:
        raise ValueError("replication indices must be a non-empty 1-D array")
    if reps.dtype.kind not in "ui" or (reps.dtype.kind == "i" and reps.min() < 0):
        raise ValueError("replication indices must be nonnegative integers")
    return reps.astype(np.uint64)


def run_kernel(kind, args, instance, budget, seed, reps, z, u, sel, counts, means):
    """Batch kernel call on pre-generated blocks (``z``: ``(R, K, >=T+2)``,
    ``u``: ``(R, >=T+2)``) or on demand when they are ``None``."""
    k = instance.n_designs
    n0, delta, exhaust, p, alpha0 = args
    if z is not None and (z.shape[0] != reps.shape[0] or z.shape[1] != k
                          or z.shape[2] < budget + 2):
        raise ValueError("sample block does not match the instance and budget")
    if u is not None and (u.shape[0] != reps.shape[0] or u.shape[1] < budget + 2):
        raise ValueError("decision block too small for this budget")
    kern.run_batch(kind, z, u, np.uint64(seed), reps, instance.means, instance.stds,
                   budget, n0, delta, exhaust, p, alpha0, sel, counts, means)


class _OCBAFamily(Policy):
    _base_id = ""

    @property
    def policy_id(self) -> str:
        return self._base_id + ("+" if self.alpha0 is not None else "")

    @property
    def n0_mode(self) -> str:
        if self.alpha0 is None:
            return "fixed"
        return "linear" if self.n0_scope == "total" else "linear-design"

    def initial_size(self, budget: int, n_designs: int) -> int:
        if self.alpha0 is None:
            return check_int(self.n0, "n0", 2)
        check_alpha0(self.alpha0, n_designs, self.n0_scope)
        return linear_n0(self.alpha0, budget, n_designs, self.n0_scope)

    def _initial(self, budget, n_designs):
        n0 = self.initial_size(budget, n_designs)
        if n0 < 2:
            raise InfeasibleBudget(
                f"{self.policy_id}: initial sample size {n0} < 2 at budget {budget}")
        if budget < n_designs * n0:
            raise InfeasibleBudget(
                f"{self.policy_id}: budget {budget} < K*N0 = {n_designs * n0}")
        return n0


class OCBA(_OCBAFamily):
    """Batch OCBA: top designs up to ``floor(alpha_i T')`` as the virtual budget
    ``T'`` grows by ``delta`` per iteration.

    With ``alpha0`` set the initial size grows with the budget (see
    :func:`linear_n0`) instead of using the constant ``n0``.  With
    ``exhaust_budget`` any leftover runs are spent one at a time on the design
    with the largest ``alpha_i / N_i``.
    """

    _kind = kern.OCBA
    _base_id = "ocba"

    def __init__(self, n0=10, delta=20, alpha0=None, exhaust_budget=True, n0_scope="total"):
        self.n0 = n0
        self.delta = delta
        self.alpha0 = alpha0
        self.exhaust_budget = exhaust_budget
        self.n0_scope = n0_scope

    def _resolve(self, budget, n_designs):
        delta = check_int(self.delta, "delta", 1)
        return self._initial(budget, n_designs), delta, bool(self.exhaust_budget), 0.0, 0.0


class OCBAD(_OCBAFamily):
    """One run per iteration to the design with the largest ``alpha_i / N_i``."""

    _kind = kern.OCBA_D
    _base_id = "ocba-d"

    def __init__(self, n0=10, alpha0=None, n0_scope="total"):
        self.n0 = n0
        self.alpha0 = alpha0
        self.n0_scope = n0_scope

    def _resolve(self, budget, n_designs):
        return self._initial(budget, n_designs), 0, True, 0.0, 0.0


class OCBAR(OCBAD):
    """One run per iteration to a design drawn with probabilities ``alpha``."""

    _kind = kern.OCBA_R
    _base_id = "ocba-r"


class EqualAllocation(Policy):
    """``floor(T/K)`` runs each, remainder one each to the first designs."""

    _kind = kern.EA
    policy_id = "ea"

    def _resolve(self, budget, n_designs):
        if budget < n_designs:
            raise InfeasibleBudget(f"ea: budget {budget} < K = {n_designs}")
        return 0, 0, True, 0.0, 0.0


class DeterministicStatic(Policy):
    """``floor(pT)`` runs of design 1 and ``floor((1-p)T)`` of design 2."""

    _kind = kern.DS
    _two_designs_only = True
    policy_id = "ds"

    def __init__(self, p=0.5):
        self.p = p

    def allocation(self, budget: int) -> tuple[int, int]:
        p = check_open_unit(self.p, "p")
        return floor_product(p * budget), floor_product((1.0 - p) * budget)

    def _resolve(self, budget, n_designs):
        n1, n2 = self.allocation(budget)
        if n1 < 1 or n2 < 1:
            raise InfeasibleBudget(f"ds: allocation ({n1}, {n2}) leaves a design empty")
        # the kernel reads the two counts from the n0/delta slots
        return n1, n2, True, 0.0, 0.0


class RandomizedStatic(Policy):
    """Each of ``T`` decisions samples design 1 with probability ``p``; both
    designs also get one guaranteed run, so ``T + 2`` runs are consumed."""

    _kind = kern.RS
    _two_designs_only = True
    policy_id = "rs"

    def __init__(self, p=0.5):
        self.p = p

    def _resolve(self, budget, n_designs):
        p = check_open_unit(self.p, "p")
        return 0, 0, True, p, 0.0


class TwoPhase(Policy):
    """Phase I: ``floor(alpha0 T / 2)`` runs per design to estimate
    ``p = S_1 / (S_1 + S_2)``; phase II: fresh runs in proportion ``p``,
    ``floor((1 - alpha0) p T) + 1`` and ``floor((1 - alpha0)(1 - p) T) + 1``.
    Only phase-II samples enter the final means."""

    _kind = kern.TWO_PHASE
    _two_designs_only = True
    policy_id = "two-phase"
    n0_mode = "linear"

    def __init__(self, alpha0=0.2):
        self.alpha0 = alpha0

    def _resolve(self, budget, n_designs):
        alpha0 = check_open_unit(self.alpha0, "alpha0")
        n0 = linear_n0(alpha0, budget, 2)
        if n0 < 2:
            raise InfeasibleBudget(f"two-phase: phase-I size {n0} < 2 at budget {budget}")
        return n0, 0, True, 0.0, alpha0


POLICY_IDS = ("ocba", "ocba-d", "ocba-r", "ocba+", "ocba-d+", "ocba-r+", "ea", "ds", "rs",
              "two-phase")

_FACTORIES = {
    "ocba": OCBA,
    "ocba-d": OCBAD,
    "ocba-r": OCBAR,
    "ea": EqualAllocation,
    "ds": DeterministicStatic,
    "rs": RandomizedStatic,
    "two-phase": TwoPhase,
}


def make_policy(policy_id: str, **params) -> Policy:
    """Build a policy from its id; ``"+"`` ids default to ``alpha0=0.2``."""
    if policy_id not in POLICY_IDS:
        raise ValueError(f"unknown policy {policy_id!r}; expected one of {', '.join(POLICY_IDS)}")
    base = policy_id.rstrip("+")
    if policy_id.endswith("+"):
        params.setdefault("alpha0", 0.2)
        if params["alpha0"] is None:
            raise ValueError(f"{policy_id} needs alpha0")
    elif base in ("ocba", "ocba-d", "ocba-r") and params.get("alpha0") is not None:
        raise ValueError(f"{policy_id} takes a constant n0; use {policy_id}+ for alpha0")
    return _FACTORIES[base](**params)


def select_by_cumsum(u: float, alphas) -> int:
    """Smallest ``k`` with ``u <= alphas[0] + ... + alphas[k]``."""
    return int(kern._by_cumsum(float(u), np.ascontiguousarray(alphas, dtype=float)))
