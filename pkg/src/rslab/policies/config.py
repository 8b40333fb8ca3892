"""Declarative policy configuration and function-style entry points."""

from __future__ import annotations

from dataclasses import dataclass

from .._validation import check_int, check_open_unit
from .base import PolicyRun, Sampler
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
    make_policy,
)

# which optional fields each policy id accepts
_ALLOWED = {
    "ocba": {"n0", "delta_increment", "exhaust_budget"},
    "ocba-d": {"n0"},
    "ocba-r": {"n0"},
    "ocba+": {"alpha0", "delta_increment", "exhaust_budget"},
    "ocba-d+": {"alpha0"},
    "ocba-r+": {"alpha0"},
    "ea": set(),
    "ds": {"p"},
    "rs": {"p"},
    "two-phase": {"alpha0"},
}
_DEFAULTS = {"n0": 10, "delta_increment": 20, "alpha0": 0.2, "p": 0.5, "exhaust_budget": True}


@dataclass(frozen=True)
class PolicyConfig:
    """A policy id plus the parameters it needs; unset fields take defaults.

    Supplying a parameter the policy does not use is an error.
    """

    policy_kind: str
    n0: int | None = None
    delta_increment: int | None = None
    p: float | None = None
    alpha0: float | None = None
    exhaust_budget: bool | None = None

    def __post_init__(self):
        if self.policy_kind not in POLICY_IDS:
            raise ValueError(f"unknown policy {self.policy_kind!r}")
        allowed = _ALLOWED[self.policy_kind]
        for name in _DEFAULTS:
            if getattr(self, name) is not None and name not in allowed:
                raise ValueError(f"{self.policy_kind} does not take {name}")
        # fail early on malformed values
        self.to_policy()

    def resolved(self) -> dict:
        """Parameters with defaults filled in, in a stable order."""
        return {name: (getattr(self, name) if getattr(self, name) is not None else _DEFAULTS[name])
                for name in sorted(_ALLOWED[self.policy_kind])}

    def to_policy(self) -> Policy:
        params = self.resolved()
        kw = {}
        if "n0" in params:
            kw["n0"] = params["n0"]
        if "alpha0" in params:
            kw["alpha0"] = params["alpha0"]
        if "delta_increment" in params:
            kw["delta"] = params["delta_increment"]
        if "exhaust_budget" in params:
            kw["exhaust_budget"] = params["exhaust_budget"]
        if "p" in params:
            kw["p"] = params["p"]
        policy = make_policy(self.policy_kind, **kw)
        _check_params(policy)
        return policy

    @property
    def policy_id(self) -> str:
        return self.policy_kind

    @staticmethod
    def parameters(policy_kind: str) -> frozenset:
        """Names of the optional fields ``policy_kind`` accepts."""
        if policy_kind not in _ALLOWED:
            raise ValueError(f"unknown policy {policy_kind!r}")
        return frozenset(_ALLOWED[policy_kind])


def _check_params(policy: Policy):
    params = policy.get_params()
    if params.get("alpha0") is not None:
        check_open_unit(params["alpha0"], "alpha0")
    if "n0" in params and params.get("alpha0") is None:
        check_int(params["n0"], "n0", 2)
    if "delta" in params:
        check_int(params["delta"], "delta_increment", 1)
    if "p" in params:
        check_open_unit(params["p"], "p")


def run_ocba(sampler: Sampler, config: PolicyConfig, T: int, trace: bool = False) -> PolicyRun:
    if config.policy_kind not in ("ocba", "ocba+"):
        raise ValueError("run_ocba needs an ocba configuration")
    return config.to_policy().run(sampler, T, trace=trace)


def run_ocba_d(sampler: Sampler, config: PolicyConfig, T: int, trace: bool = False) -> PolicyRun:
    if config.policy_kind not in ("ocba-d", "ocba-d+"):
        raise ValueError("run_ocba_d needs an ocba-d configuration")
    return config.to_policy().run(sampler, T, trace=trace)


def run_ocba_r(sampler: Sampler, config: PolicyConfig, T: int, trace: bool = False) -> PolicyRun:
    if config.policy_kind not in ("ocba-r", "ocba-r+"):
        raise ValueError("run_ocba_r needs an ocba-r configuration")
    return config.to_policy().run(sampler, T, trace=trace)


def run_plus_variant(kind: str, sampler: Sampler, alpha0: float, T: int,
                     delta_increment: int = 20, trace: bool = False) -> PolicyRun:
    """OCBA, OCBA-D or OCBA-R (``kind`` with or without the ``+``) with an
    initial size that grows linearly in ``T``."""
    base = kind.lower().rstrip("+")
    if base == "ocba":
        policy = OCBA(delta=delta_increment, alpha0=alpha0)
    elif base == "ocba-d":
        policy = OCBAD(alpha0=alpha0)
    elif base == "ocba-r":
        policy = OCBAR(alpha0=alpha0)
    else:
        raise ValueError(f"unknown OCBA variant {kind!r}")
    return policy.run(sampler, T, trace=trace)


def run_ea(sampler: Sampler, T: int) -> PolicyRun:
    return EqualAllocation().run(sampler, T)


def run_ds(sampler: Sampler, p: float, T: int) -> PolicyRun:
    return DeterministicStatic(p=p).run(sampler, T)


def run_rs(sampler: Sampler, p: float, T: int) -> PolicyRun:
    return RandomizedStatic(p=p).run(sampler, T)


def run_two_phase(sampler: Sampler, alpha0: float, T: int) -> PolicyRun:
    return TwoPhase(alpha0=alpha0).run(sampler, T)
