"""Problem instances, run records and the sampling oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng
from .._validation import check_int, check_vector


@dataclass(frozen=True)
class ProblemInstance:
    """K normal designs with means ``means`` and standard deviations ``stds``."""

    means: np.ndarray
    stds: np.ndarray
    id: str = "custom"

    def __post_init__(self):
        means = check_vector(self.means, "means")
        stds = check_vector(self.stds, "stds", positive=True)
        if means.shape != stds.shape:
            raise ValueError("means and stds must have the same length")
        if means.shape[0] < 2:
            raise ValueError("an instance needs at least two designs")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def n_designs(self) -> int:
        return int(self.means.shape[0])

    @property
    def best_index(self) -> int:
        """Index of the largest mean (smallest index on ties)."""
        return int(np.argmax(self.means))

    @property
    def has_unique_best(self) -> bool:
        return int(np.sum(self.means == self.means.max())) == 1

    @property
    def gap(self) -> float:
        """Distance between the best mean and the runner-up."""
        top = np.sort(self.means)[::-1]
        return float(top[0] - top[1])

    def require_unique_best(self) -> int:
        if not self.has_unique_best:
            raise ValueError(f"instance {self.id!r} has no unique best design")
        return self.best_index

    @classmethod
    def two_designs(cls, delta: float, sigma1: float, sigma2: float, id: str = "two-design"):
        """Design 1 is best by ``delta``: means ``(delta, 0)``."""
        return cls(np.array([delta, 0.0]), np.array([sigma1, sigma2]), id)

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (self.id == other.id and np.array_equal(self.means, other.means)
                and np.array_equal(self.stds, other.stds))

    def __hash__(self):
        return hash((self.id, self.means.tobytes(), self.stds.tobytes()))


@dataclass(frozen=True, eq=False)
class PolicyRun:
    """Outcome of one policy execution.

    ``trace`` holds per-iteration ``(counts, fractions)`` pairs when requested;
    ``discarded`` counts runs that were drawn but not kept (two-phase only).
    """

    selected: int
    final_counts: np.ndarray
    total_consumed: int
    final_means: np.ndarray
    trace: list | None = None
    discarded: int = 0

    def __eq__(self, other):
        if not isinstance(other, PolicyRun):
            return NotImplemented
        if (self.selected, self.total_consumed, self.discarded) != (
                other.selected, other.total_consumed, other.discarded):
            return False
        if not (np.array_equal(self.final_counts, other.final_counts)
                and np.array_equal(self.final_means, other.final_means)):
            return False
        if (self.trace is None) != (other.trace is None):
            return False
        if self.trace is None:
            return True
        return len(self.trace) == len(other.trace) and all(
            np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            for a, b in zip(self.trace, other.trace))


@dataclass(frozen=True)
class BatchResult:
    """Outcomes of many replications of one policy at one budget."""

    replications: np.ndarray
    selected: np.ndarray
    counts: np.ndarray
    means: np.ndarray

    def correct(self, best_index: int) -> np.ndarray:
        return self.selected == best_index

    def pcs(self, best_index: int) -> float:
        return float(np.mean(self.correct(best_index)))


@dataclass
class Sampler:
    """Sampling oracle for one replication of one instance.

    Run ``r`` of design ``i`` is ``mu_i + sigma_i * Z(seed, replication, i, r)``
    and randomised policies read their uniforms from the decision stream, so
    two policies given equal samplers see the same samples.  Subclasses may
    override :meth:`decision_block` to script the decisions.
    """

    instance: ProblemInstance
    master_seed: int = 0
    replication: int = 0

    def __post_init__(self):
        self.master_seed = check_int(self.master_seed, "master_seed", 0)
        self.replication = check_int(self.replication, "replication", 0)

    def draw(self, design: int, run: int) -> float:
        key = rng.StreamKey(self.master_seed, self.replication, design, run)
        return rng.normal_sample(key, self.instance.means[design], self.instance.stds[design])

    def standard_block(self, n_runs: int) -> np.ndarray:
        """Standard normal draws ``Z[i, r]`` for runs ``0..n_runs-1``."""
        return rng.normal_block(self.master_seed, [self.replication],
                                self.instance.n_designs, n_runs)[0]

    def decision_block(self, n_runs: int) -> np.ndarray:
        return rng.uniform_block(self.master_seed, [self.replication], n_runs)[0]
