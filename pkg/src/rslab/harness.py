"""Monte Carlo PCS sweeps with common random numbers.

Every replication index owns one sample stream per design (see :mod:`rslab.rng`),
so all policies and budgets evaluated on replication ``r`` of an instance see
the same samples.  Work is split into blocks of replications; each block
yields integer correct-selection counts, and the totals are summed, so the
results do not depend on how blocks are distributed over processes.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import rng
from ._validation import check_int
from .oracles import TwoDesignParams
from .policies.base import ProblemInstance
from .policies.config import PolicyConfig
from .policies.estimators import Policy, _replication_indices, run_kernel

log = logging.getLogger(__name__)

__all__ = [
    "builtin_instances",
    "get_instance",
    "ExperimentSpec",
    "PcsCurvePoint",
    "CellError",
    "run_sweep",
    "persist",
    "load",
    "dumps",
    "loads",
    "ResultsParseError",
    "ConditionalEstimate",
    "conditional_pfs",
    "conditional_pfs_curve",
    "HEADER",
]

HEADER = ["instance", "policy", "T", "pcs_hat", "std_err", "replications", "master_seed",
          "n0_mode", "params"]

BLOCK = 256


def builtin_instances() -> list[ProblemInstance]:
    """The six benchmark instances; the best design is always the last one."""
    ten = [1.0 + 0.1 * i for i in range(9)] + [5.0]
    slip = [1.0, 1.0, 1.0, 1.0, 2.0]
    ramp = [float(i) for i in range(1, 11)]
    return [
        ProblemInstance(ten, [5.0] * 9 + [20.0], "ten-designs-a"),
        ProblemInstance(ten, [20.0] * 9 + [5.0], "ten-designs-b"),
        ProblemInstance(slip, [2.0, 2.0, 2.0, 2.0, 10.0], "slippage-a"),
        ProblemInstance(slip, [10.0, 10.0, 10.0, 10.0, 2.0], "slippage-b"),
        ProblemInstance(ramp, [10.0] * 10, "equal-variances"),
        ProblemInstance(ramp, [float(s) for s in range(6, 16)], "increasing-variances"),
    ]


def get_instance(instance_id: str) -> ProblemInstance:
    for inst in builtin_instances():
        if inst.id == instance_id:
            return inst
    raise KeyError(f"unknown instance {instance_id!r}")


def _budget_values(budgets) -> tuple[int, ...]:
    start, stop, step = (check_int(b, name, 1) for b, name in zip(budgets, ("start", "stop", "step")))
    if stop < start:
        raise ValueError("budget stop must be >= start")
    return tuple(range(start, stop + 1, step))


@dataclass(frozen=True)
class ExperimentSpec:
    """Instances x policies x budgets, each cell estimated with ``replications``
    common-random-number replications.  ``budgets`` is an inclusive
    ``(start, stop, step)`` triple."""

    instance_ids: tuple
    policy_configs: tuple
    budgets: tuple
    replications: int
    master_seed: int = 0
    instances: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "instance_ids", tuple(self.instance_ids))
        object.__setattr__(self, "policy_configs", tuple(self.policy_configs))
        object.__setattr__(self, "budgets", tuple(self.budgets))
        if not self.instance_ids:
            raise ValueError("at least one instance is required")
        if len(set(self.instance_ids)) != len(self.instance_ids):
            raise ValueError("instance ids must be distinct")
        if not self.policy_configs:
            raise ValueError("at least one policy is required")
        for cfg in self.policy_configs:
            if not isinstance(cfg, PolicyConfig):
                raise TypeError("policy_configs must hold PolicyConfig objects")
        check_int(self.replications, "replications", 1)
        seed = check_int(self.master_seed, "master_seed", 0)
        if seed >= 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        _budget_values(self.budgets)
        known = {inst.id: inst for inst in builtin_instances()}
        known.update({inst.id: inst for inst in self.instances})
        missing = [i for i in self.instance_ids if i not in known]
        if missing:
            raise KeyError(f"unknown instance {missing[0]!r}")
        object.__setattr__(self, "instances", tuple(known[i] for i in self.instance_ids))

    @property
    def budget_values(self) -> tuple[int, ...]:
        return _budget_values(self.budgets)

    def infeasible_cells(self) -> list[tuple[str, str, int, str]]:
        """Cells whose policy cannot run at that budget, with the reason."""
        out = []
        for inst in self.instances:
            for cfg in self.policy_configs:
                policy = cfg.to_policy()
                for t in self.budget_values:
                    try:
                        policy._args(t, inst)
                    except ValueError as exc:
                        out.append((inst.id, cfg.policy_kind, t, str(exc)))
        return out


def _params_text(cfg: PolicyConfig) -> str:
    return ";".join(f"{k}={_fmt_value(v)}" for k, v in cfg.resolved().items())


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class PcsCurvePoint:
    instance_id: str
    policy_id: str
    T: int
    pcs_hat: float
    std_err: float
    replications: int
    master_seed: int
    n0_mode: str = "none"
    params: str = ""

    def __post_init__(self):
        if not 0.0 <= self.pcs_hat <= 1.0:
            raise ValueError("pcs_hat must lie in [0, 1]")
        if not self.std_err >= 0.0:
            raise ValueError("std_err must be nonnegative")


@dataclass(frozen=True)
class CellError:
    instance_id: str
    policy_id: str
    T: int
    message: str


def _run_block(instance: ProblemInstance, configs, budgets, seed, reps, best):
    """Correct-selection counts ``[policy][budget]`` (``-1`` for infeasible cells)."""
    policies = [cfg.to_policy() for cfg in configs]
    plans = []
    t_max = 0
    for policy in policies:
        row = []
        for t in budgets:
            try:
                _, args = policy._args(t, instance)
                row.append(args)
                t_max = max(t_max, t)
            except ValueError:
                row.append(None)
        plans.append(row)
    counts = np.full((len(policies), len(budgets)), -1, dtype=np.int64)
    if t_max == 0:
        return counts
    z = rng.normal_block(seed, reps, instance.n_designs, t_max + 2)
    u = rng.uniform_block(seed, reps, t_max + 2)
    n = reps.shape[0]
    sel = np.empty(n, dtype=np.int64)
    cnt = np.empty((n, instance.n_designs), dtype=np.int64)
    means = np.empty((n, instance.n_designs))
    for a, policy in enumerate(policies):
        for b, t in enumerate(budgets):
            args = plans[a][b]
            if args is None:
                continue
            run_kernel(policy._kind, args, instance, t, seed, reps, z, u, sel, cnt, means)
            counts[a, b] = int(np.count_nonzero(sel == best))
    return counts


def _run_block_star(job):
    return _run_block(*job)


def run_sweep(spec: ExperimentSpec, workers: int = 1, errors: list | None = None,
              block: int = BLOCK) -> list[PcsCurvePoint]:
    """Estimate PCS for every (instance, policy, budget) cell.

    Cells that cannot run (budget too small, policy undefined for the
    instance, no unique best) are skipped, logged and appended to ``errors``.
    Results are identical for any ``workers`` and ``block``.
    """
    workers = check_int(workers, "workers", 1)
    block = check_int(block, "block", 1)
    budgets = spec.budget_values
    n = spec.replications
    configs = spec.policy_configs
    cell_errors: list[CellError] = []

    jobs = []
    owners = []
    usable = []
    for inst in spec.instances:
        if not inst.has_unique_best:
            for cfg in configs:
                for t in budgets:
                    cell_errors.append(CellError(inst.id, cfg.policy_kind, t,
                                                 "instance has no unique best design"))
            usable.append(False)
            continue
        usable.append(True)
        for lo in range(0, n, block):
            reps = np.arange(lo, min(lo + block, n), dtype=np.uint64)
            jobs.append((inst, configs, budgets, spec.master_seed, reps, inst.best_index))
            owners.append(inst.id)

    totals = {inst.id: np.zeros((len(configs), len(budgets)), dtype=np.int64)
              for inst in spec.instances}
    if workers == 1 or len(jobs) <= 1:
        results = map(_run_block_star, jobs)
        for owner, res in zip(owners, results):
            totals[owner] += res
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for owner, res in zip(owners, pool.map(_run_block_star, jobs)):
                totals[owner] += res

    points = []
    for inst, ok in zip(spec.instances, usable):
        if not ok:
            continue
        for a, cfg in enumerate(configs):
            policy = cfg.to_policy()
            for b, t in enumerate(budgets):
                correct = totals[inst.id][a, b]
                if correct < 0:
                    try:
                        policy._args(t, inst)
                        msg = "cell failed"
                    except ValueError as exc:
                        msg = str(exc)
                    cell_errors.append(CellError(inst.id, cfg.policy_kind, t, msg))
                    continue
                pcs = int(correct) / n
                points.append(PcsCurvePoint(
                    instance_id=inst.id,
                    policy_id=cfg.policy_kind,
                    T=t,
                    pcs_hat=pcs,
                    std_err=math.sqrt(pcs * (1.0 - pcs) / n),
                    replications=n,
                    master_seed=spec.master_seed,
                    n0_mode=policy.n0_mode,
                    params=_params_text(cfg),
                ))
    for err in cell_errors:
        log.warning("skipped %s/%s at T=%d: %s", err.instance_id, err.policy_id, err.T, err.message)
    if errors is not None:
        errors.extend(cell_errors)
    return points


# ---------------------------------------------------------------- persistence

def _fmt_float(x: float) -> str:
    return "%.17g" % x


def dumps(points) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for p in points:
        writer.writerow([p.instance_id, p.policy_id, p.T, _fmt_float(p.pcs_hat),
                         _fmt_float(p.std_err), p.replications, p.master_seed, p.n0_mode,
                         p.params])
    return buf.getvalue()


def persist(points, path) -> None:
    """Write ``points`` as UTF-8 CSV (header plus one row per cell)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps(points))


class ResultsParseError(ValueError):
    """Malformed results file; ``line`` and ``column`` are 1-based."""

    def __init__(self, message, line, column=None, source="<string>"):
        where = f"{source}: line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column
        self.source = source


def loads(text: str, source: str = "<string>") -> list[PcsCurvePoint]:
    """Parse results CSV text; errors name the offending line (and column)."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise ResultsParseError("missing header", 1, source=source)
    if rows[0] != HEADER:
        raise ResultsParseError(f"header must be {','.join(HEADER)}", 1, source=source)
    converters = [str, str, int, float, float, int, int, str, str]
    points = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(HEADER):
            raise ResultsParseError(f"expected {len(HEADER)} fields, found {len(row)}", lineno,
                                    source=source)
        values = []
        for col, (conv, raw) in enumerate(zip(converters, row), start=1):
            try:
                values.append(conv(raw))
            except ValueError:
                raise ResultsParseError(f"bad {HEADER[col - 1]} value {raw!r}", lineno, col,
                                        source=source) from None
        try:
            points.append(PcsCurvePoint(*values))
        except ValueError as exc:
            raise ResultsParseError(str(exc), lineno, source=source) from None
    return points


def load(path) -> list[PcsCurvePoint]:
    with open(path, encoding="utf-8", newline="") as fh:
        return loads(fh.read(), source=os.fspath(path))


# ------------------------------------------------- two-design conditional MC

@dataclass(frozen=True)
class ConditionalEstimate:
    """PFS estimate ``mean_r Phi(-delta / sqrt(s1^2/N1 + s2^2/N2))``.

    ``log_pfs`` is computed in log space and stays finite when the PFS itself
    underflows; ``log_std_err`` is the delta-method standard error of it.
    """

    pfs: float
    std_err: float
    log_pfs: float
    log_std_err: float
    replications: int


def _summarise(terms: np.ndarray) -> ConditionalEstimate:
    n = terms.shape[0]
    top = terms.max()
    w = np.exp(terms - top)
    mean_w = w.mean()
    log_pfs = top + math.log(mean_w)
    sd_w = w.std(ddof=1) if n > 1 else 0.0
    rel = sd_w / math.sqrt(n) / mean_w
    return ConditionalEstimate(
        pfs=math.exp(log_pfs),
        std_err=math.exp(log_pfs) * rel,
        log_pfs=log_pfs,
        log_std_err=rel,
        replications=n,
    )


def conditional_pfs_curve(policies, params: TwoDesignParams, budgets, seed: int = 0,
                          replications=10**6, max_block_bytes: int = 1 << 25) -> dict:
    """Rao-Blackwellised PFS for two-design policies whose allocation depends
    only on variance estimates (any OCBA-family policy when K = 2).

    For normal samples the prefix variance estimates are independent of the
    final sample means, so conditioning on the final counts leaves the normal
    probability ``Phi(-delta / sqrt(s1^2/N1 + s2^2/N2))``, which is averaged
    (in log space) instead of a 0/1 indicator.  Every policy and budget sees
    the same samples.  Returns ``{(policy_id, T): ConditionalEstimate}``.
    """
    policies = list(policies)
    budgets = [check_int(t, "T", 1) for t in budgets]
    if not policies or not budgets:
        raise ValueError("need at least one policy and one budget")
    instance = ProblemInstance.two_designs(params.delta, params.sigma1, params.sigma2)
    reps = _replication_indices(replications)
    plans = []
    for policy in policies:
        for t in budgets:
            budget, args = policy._args(t, instance)
            plans.append((policy, t, budget, args))
    keys = [(policy.policy_id, t) for policy, t, _, _ in plans]
    if len(set(keys)) != len(keys):
        raise ValueError("policy ids and budgets must be distinct")
    cap = max(b for _, _, b, _ in plans) + 2
    step = max(1, max_block_bytes // (8 * 3 * cap))
    terms = np.empty((len(plans), reps.shape[0]))
    for lo in range(0, reps.shape[0], step):
        part = reps[lo:lo + step]
        m = part.shape[0]
        z = rng.normal_block(seed, part, 2, cap)
        u = rng.uniform_block(seed, part, cap)
        sel = np.empty(m, dtype=np.int64)
        cnt = np.empty((m, 2), dtype=np.int64)
        means = np.empty((m, 2))
        for j, (policy, _, budget, args) in enumerate(plans):
            run_kernel(policy._kind, args, instance, budget, seed, part, z, u, sel, cnt, means)
            scale = np.sqrt(params.sigma1**2 / cnt[:, 0] + params.sigma2**2 / cnt[:, 1])
            terms[j, lo:lo + m] = special.log_ndtr(-params.delta / scale)
    return {key: _summarise(terms[j]) for j, key in enumerate(keys)}


def conditional_pfs(policy: Policy, params: TwoDesignParams, T: int, seed: int = 0,
                    replications=10**6) -> ConditionalEstimate:
    """Single-budget form of :func:`conditional_pfs_curve`."""
    return conditional_pfs_curve([policy], params, [T], seed, replications)[(policy.policy_id, T)]
