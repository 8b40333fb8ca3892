"""Fixed-budget ranking and selection.

OCBA-family sequential policies and static baselines, exact false-selection
oracles for two designs, large-deviations rates and bounds, and a
common-random-number Monte Carlo harness.
"""

from importlib.metadata import PackageNotFoundError, version

from .allocation import FractionOutput, compute_fractions
from .harness import (
    ExperimentSpec,
    PcsCurvePoint,
    builtin_instances,
    conditional_pfs,
    conditional_pfs_curve,
    get_instance,
    load,
    persist,
    run_sweep,
)
from .oracles import TwoDesignParams, pfs_ds, pfs_rs, pfs_two_phase, phat_density
from .policies import (
    OCBA,
    OCBAD,
    OCBAR,
    DeterministicStatic,
    EqualAllocation,
    PolicyConfig,
    PolicyRun,
    ProblemInstance,
    RandomizedStatic,
    Sampler,
    TwoPhase,
    make_policy,
)
from .rates import (
    ea_robustness_check,
    empirical_ld_rate,
    finite_sample_upper_bound,
    optimal_rate_ds,
    rate_ds,
    rate_ea,
    rate_rs,
    rate_two_phase,
    variance_driven_lower_bound,
)

try:
    __version__ = version("rslab")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "FractionOutput",
    "compute_fractions",
    "ExperimentSpec",
    "PcsCurvePoint",
    "builtin_instances",
    "conditional_pfs",
    "conditional_pfs_curve",
    "get_instance",
    "load",
    "persist",
    "run_sweep",
    "TwoDesignParams",
    "pfs_ds",
    "pfs_rs",
    "pfs_two_phase",
    "phat_density",
    "OCBA",
    "OCBAD",
    "OCBAR",
    "DeterministicStatic",
    "EqualAllocation",
    "PolicyConfig",
    "PolicyRun",
    "ProblemInstance",
    "RandomizedStatic",
    "Sampler",
    "TwoPhase",
    "make_policy",
    "ea_robustness_check",
    "empirical_ld_rate",
    "finite_sample_upper_bound",
    "optimal_rate_ds",
    "rate_ds",
    "rate_ea",
    "rate_rs",
    "rate_two_phase",
    "variance_driven_lower_bound",
    "__version__",
]
