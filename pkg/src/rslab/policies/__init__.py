"""Fixed-budget allocation policies."""

from .base import BatchResult, PolicyRun, ProblemInstance, Sampler
from .config import (
    PolicyConfig,
    run_ds,
    run_ea,
    run_ocba,
    run_ocba_d,
    run_ocba_r,
    run_plus_variant,
    run_rs,
    run_two_phase,
)
from .estimators import (
    OCBA,
    OCBAD,
    OCBAR,
    POLICY_IDS,
    DeterministicStatic,
    EqualAllocation,
    Policy,
    RandomizedStatic,
    TwoPhase,
    linear_n0,
    make_policy,
    select_by_cumsum,
)

__all__ = [
    "BatchResult",
    "PolicyRun",
    "ProblemInstance",
    "Sampler",
    "PolicyConfig",
    "run_ds",
    "run_ea",
    "run_ocba",
    "run_ocba_d",
    "run_ocba_r",
    "run_plus_variant",
    "run_rs",
    "run_two_phase",
    "OCBA",
    "OCBAD",
    "OCBAR",
    "POLICY_IDS",
    "DeterministicStatic",
    "EqualAllocation",
    "Policy",
    "RandomizedStatic",
    "TwoPhase",
    "linear_n0",
    "make_policy",
    "select_by_cumsum",
]
