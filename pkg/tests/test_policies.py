import math

import numpy as np
import pytest
from sklearn.base import clone

from rslab import oracles
from rslab._validation import InfeasibleBudget
from rslab.harness import get_instance
from rslab.policies import (
    OCBA,
    OCBAD,
    OCBAR,
    DeterministicStatic,
    EqualAllocation,
    PolicyConfig,
    ProblemInstance,
    RandomizedStatic,
    Sampler,
    TwoPhase,
    make_policy,
)
from rslab.policies.config import run_ea, run_ocba, run_ocba_r, run_plus_variant, run_two_phase
from rslab.policies.estimators import POLICY_IDS, linear_n0, select_by_cumsum

TWO = ProblemInstance.two_designs(1.0, 1.0, 2.0)
THREE = ProblemInstance([3.0, 2.0, 1.0], [1.0, 1.0, 1.0])
# OCBA fractions of THREE (mpmath reference)
THREE_ALPHAS = [0.45194101601103784, 0.43844718719116973, 0.10961179679779243]


class ScriptedDecisions(Sampler):
    """Sampler whose decision stream is a constant."""

    def __init__(self, instance, value, **kw):
        super().__init__(instance, **kw)
        self.value = value

    def decision_block(self, n_runs):
        return np.full(n_runs, self.value)


def all_policies():
    return [make_policy(pid) for pid in POLICY_IDS]


def feasible(policy, instance):
    return not (getattr(policy, "_two_designs_only", False) and instance.n_designs != 2)


# ------------------------------------------------------------------ examples

def test_ocba_initialisation_only():
    inst = ProblemInstance([0.0, 0.5], [1.0, 1.0])
    sampler = Sampler(inst, 4, 1)
    run = OCBA(n0=2, delta=1).run(sampler, 4, trace=True)
    assert list(run.final_counts) == [2, 2]
    assert run.trace == []
    means = [np.mean([sampler.draw(i, r) for r in range(2)]) for i in range(2)]
    assert run.selected == int(np.argmax(means))
    np.testing.assert_allclose(run.final_means, means, rtol=1e-14)


@pytest.mark.parametrize("cls", [OCBA, OCBAD, OCBAR])
def test_budget_equal_to_initialisation(cls):
    run = cls(n0=7).run(Sampler(THREE, 0, 0), 21, trace=True)
    assert list(run.final_counts) == [7, 7, 7]
    assert run.trace == []


def test_cumsum_rule():
    assert select_by_cumsum(0.99, [0.5, 0.5]) == 1
    assert select_by_cumsum(0.5, [0.5, 0.5]) == 0
    for u in (0.0, 0.3, 0.999999):
        assert select_by_cumsum(u, [1.0, 0.0, 0.0, 0.0]) == 0


def test_plus_variant_design_scope_boundary():
    inst = ProblemInstance([1, 2, 3, 4, 5.0], [1.0] * 5)
    policy = make_policy("ocba-r+", alpha0=0.2, n0_scope="design")
    assert policy.initial_size(200, 5) == 40
    run = policy.run(Sampler(inst, 0, 0), 200, trace=True)
    assert list(run.final_counts) == [40] * 5
    assert run.trace == []


def test_plus_variant_total_scope():
    assert linear_n0(0.2, 200, 5) == 8
    assert linear_n0(0.2, 200, 5, "design") == 40
    assert linear_n0(0.29, 100, 1) == 29
    with pytest.raises(ValueError):
        linear_n0(0.2, 200, 5, "other")
    assert make_policy("ocba+").initial_size(200, 5) == 8


@pytest.mark.parametrize("T,expected", [(10, [4, 3, 3]), (9, [3, 3, 3])])
def test_equal_allocation_counts(T, expected):
    run = EqualAllocation().run(Sampler(THREE, 0, 0), T)
    assert list(run.final_counts) == expected


@pytest.mark.parametrize("p,T,expected", [(0.5, 100, (50, 50)), (1 / 3, 100, (33, 66)),
                                          (0.29, 100, (29, 71))])
def test_deterministic_static_split(p, T, expected):
    assert DeterministicStatic(p).allocation(T) == expected
    run = DeterministicStatic(p).run(Sampler(TWO, 0, 0), T)
    assert tuple(run.final_counts) == expected


def test_randomized_static_all_design_one():
    inst = ProblemInstance.two_designs(1.0, 1.0, 1.0)
    run = RandomizedStatic(p=0.5).run(ScriptedDecisions(inst, 0.0), 5)
    assert list(run.final_counts) == [6, 1]
    assert run.total_consumed == 7


def test_randomized_static_all_design_two():
    inst = ProblemInstance.two_designs(1.0, 1.0, 1.0)
    run = RandomizedStatic(p=0.5).run(ScriptedDecisions(inst, 0.9), 5)
    assert list(run.final_counts) == [1, 6]


def test_two_phase_counts_and_discards():
    run = TwoPhase(alpha0=0.2).run(Sampler(TWO, 0, 3), 100)
    assert run.discarded == 20
    n1, n2 = run.final_counts
    assert 2 <= n1 + n2 <= 82
    # phase-II counts use the floor rule with one guaranteed run each
    assert n1 >= 1 and n2 >= 1


# -------------------------------------------------------------- invariants

@pytest.mark.parametrize("policy", all_policies(), ids=lambda p: p.policy_id)
@pytest.mark.parametrize("T", [40, 97, 400])
def test_budget_accounting(policy, T):
    inst = TWO if feasible(policy, THREE) is False else THREE
    run = policy.run(Sampler(inst, 2, 5), T)
    pid = policy.policy_id
    if pid == "rs":
        assert run.total_consumed == T + 2
    elif pid == "two-phase":
        assert run.total_consumed + run.discarded <= T + 2
    elif pid == "ds":
        assert run.total_consumed <= T
    else:
        assert run.total_consumed == T
    assert np.all(run.final_counts >= 1)
    assert run.total_consumed == int(run.final_counts.sum())


def test_no_exhaust_stays_within_budget():
    run = OCBA(n0=5, delta=7, exhaust_budget=False).run(Sampler(THREE, 0, 0), 100)
    assert run.total_consumed <= 100
    full = OCBA(n0=5, delta=7).run(Sampler(THREE, 0, 0), 100)
    assert full.total_consumed == 100


@pytest.mark.parametrize("policy", all_policies(), ids=lambda p: p.policy_id)
def test_replay_determinism(policy):
    inst = TWO if not feasible(policy, THREE) else THREE
    a = policy.run(Sampler(inst, 11, 3), 150, trace=True)
    b = clone(policy).run(Sampler(inst, 11, 3), 150, trace=True)
    assert a == b
    c = policy.run(Sampler(inst, 12, 3), 150, trace=True)
    assert not np.array_equal(a.final_means, c.final_means)


@pytest.mark.parametrize("pid", ["ocba", "ocba-d", "ocba-r", "ocba+", "ocba-d+", "ocba-r+"])
def test_trace_counts_monotone(pid):
    run = make_policy(pid).run(Sampler(get_instance("slippage-a"), 0, 1), 600, trace=True)
    assert run.trace
    prev = None
    for counts, fracs in run.trace:
        assert fracs.sum() == pytest.approx(1.0, rel=1e-12)
        if prev is not None:
            assert np.all(counts >= prev)
            assert counts.sum() > prev.sum()
        prev = counts
    assert np.all(run.final_counts >= prev)


@pytest.mark.parametrize("policy", all_policies(), ids=lambda p: p.policy_id)
def test_simulate_matches_single_runs(policy):
    inst = TWO if not feasible(policy, THREE) else THREE
    batch = policy.simulate(inst, 120, seed=8, replications=[0, 5, 9])
    for a, rep in enumerate((0, 5, 9)):
        run = policy.run(Sampler(inst, 8, rep), 120)
        assert batch.selected[a] == run.selected
        np.testing.assert_array_equal(batch.counts[a], run.final_counts)
        np.testing.assert_array_equal(batch.means[a], run.final_means)


@pytest.mark.parametrize("policy", all_policies(), ids=lambda p: p.policy_id)
def test_on_demand_matches_blocks(policy):
    inst = TWO if not feasible(policy, THREE) else THREE
    a = policy.simulate(inst, 200, seed=1, replications=40, on_demand=False)
    b = policy.simulate(inst, 200, seed=1, replications=40, on_demand=True)
    np.testing.assert_array_equal(a.selected, b.selected)
    np.testing.assert_array_equal(a.counts, b.counts)
    np.testing.assert_array_equal(a.means, b.means)


# ------------------------------------------------------------ validation

def test_infeasible_budget():
    with pytest.raises(InfeasibleBudget):
        OCBA(n0=10).run(Sampler(THREE, 0, 0), 29)
    with pytest.raises(InfeasibleBudget):
        make_policy("ocba-d+").run(Sampler(THREE, 0, 0), 20)
    assert OCBA(n0=10).minimal_budget(3) == 30
    assert make_policy("ocba+").minimal_budget(10) == 100


def test_two_design_policies_reject_k3():
    for pid in ("ds", "rs", "two-phase"):
        with pytest.raises(ValueError, match="two designs"):
            make_policy(pid).run(Sampler(THREE, 0, 0), 100)


@pytest.mark.parametrize("pid,params", [
    ("nope", {}),
    ("ocba", {"alpha0": 0.2}),
    ("ocba+", {"alpha0": None}),
])
def test_make_policy_rejects(pid, params):
    with pytest.raises(ValueError):
        make_policy(pid, **params)


@pytest.mark.parametrize("kw", [
    dict(policy_kind="ocba-d", delta_increment=5),
    dict(policy_kind="ea", p=0.3),
    dict(policy_kind="ds", p=1.5),
    dict(policy_kind="ocba+", alpha0=0.0),
    dict(policy_kind="ocba", n0=1),
    dict(policy_kind="unknown"),
])
def test_policy_config_rejects(kw):
    with pytest.raises(ValueError):
        PolicyConfig(**kw)


def test_policy_config_defaults():
    cfg = PolicyConfig("ocba")
    assert cfg.resolved() == {"delta_increment": 20, "exhaust_budget": True, "n0": 10}
    assert cfg.to_policy().get_params()["delta"] == 20
    assert PolicyConfig.parameters("ocba-r+") == frozenset({"alpha0"})


def test_function_entry_points():
    s = Sampler(THREE, 1, 1)
    assert run_ocba(s, PolicyConfig("ocba"), 60) == OCBA().run(s, 60)
    assert run_ocba_r(s, PolicyConfig("ocba-r", n0=4), 60) == OCBAR(n0=4).run(s, 60)
    assert run_plus_variant("ocba-d", s, 0.3, 120) == make_policy("ocba-d+", alpha0=0.3).run(s, 120)
    assert run_ea(s, 10) == EqualAllocation().run(s, 10)
    assert run_two_phase(Sampler(TWO, 0, 0), 0.2, 40) == TwoPhase(0.2).run(Sampler(TWO, 0, 0), 40)
    with pytest.raises(ValueError):
        run_ocba(s, PolicyConfig("ocba-d"), 60)


def test_estimator_api():
    p = OCBA(n0=5)
    assert p.get_params() == {"n0": 5, "delta": 20, "alpha0": None, "exhaust_budget": True,
                              "n0_scope": "total"}
    q = clone(p).set_params(alpha0=0.3)
    assert q.policy_id == "ocba+" and p.policy_id == "ocba"
    fitted = p.fit(Sampler(THREE, 0, 0), 60)
    assert fitted is p
    assert p.total_consumed_ == 60 and p.counts_.sum() == 60


# ------------------------------------------------------- statistical checks

def _mc_pfs(policy, inst, T, reps, seed=0):
    batch = policy.simulate(inst, T, seed=seed, replications=reps)
    pfs = 1.0 - batch.pcs(inst.best_index)
    return pfs, math.sqrt(pfs * (1 - pfs) / reps)


@pytest.mark.parametrize("policy,params,T,oracle", [
    (DeterministicStatic(0.5), oracles.TwoDesignParams(1.0, 1.5, 1.5), 20,
     lambda prm: oracles.pfs_ds(prm, 0.5, 20)),
    (DeterministicStatic(1 / 3), oracles.TwoDesignParams(1.0, 1.0, 2.0), 50,
     lambda prm: oracles.pfs_ds(prm, 1 / 3, 50)),
    (RandomizedStatic(0.5), oracles.TwoDesignParams(1.0, 1.0, 1.0), 30,
     lambda prm: oracles.pfs_rs(prm, 0.5, 30)),
    (TwoPhase(0.2), oracles.TwoDesignParams(1.0, 1.0, 2.0), 40,
     lambda prm: oracles.pfs_two_phase(prm, 0.2, 40)),
], ids=["ds-equal", "ds-third", "rs", "two-phase"])
def test_mc_matches_oracle(policy, params, T, oracle):
    inst = ProblemInstance.two_designs(params.delta, params.sigma1, params.sigma2)
    pfs, se = _mc_pfs(policy, inst, T, 100_000, seed=17)
    assert abs(pfs - oracle(params)) < 3 * se


def test_two_phase_symmetry():
    inst = ProblemInstance.two_designs(1.0, 2.0, 2.0)
    batch = TwoPhase(0.2).simulate(inst, 200, seed=3, replications=20_000)
    diff = batch.counts[:, 0] - batch.counts[:, 1]
    assert abs(diff.mean()) < 3 * diff.std() / math.sqrt(diff.size)


def test_ocba_two_designs_tracks_std_ratio():
    batch = OCBAD(n0=10).simulate(TWO, 10_000, seed=5, replications=200)
    share = batch.counts[:, 0] / 10_000
    assert share.mean() == pytest.approx(1 / 3, abs=0.01)
    eq = ProblemInstance.two_designs(1.0, 1.0, 1.0)
    batch = OCBAD(n0=10).simulate(eq, 10_000, seed=5, replications=200)
    assert np.mean(np.abs(batch.counts[:, 0] - batch.counts[:, 1])) / 10_000 < 0.05


@pytest.mark.parametrize("cls", [OCBA, OCBAD, OCBAR])
def test_fractions_converge_three_designs(cls):
    batch = cls(n0=10).simulate(THREE, 100_000, seed=6, replications=100)
    np.testing.assert_allclose(batch.counts.mean(axis=0) / 100_000, THREE_ALPHAS, atol=0.02)


def test_ten_designs_a_ordering_at_2000():
    inst = get_instance("ten-designs-a")
    pcs = {pid: make_policy(pid).simulate(inst, 2000, seed=0, replications=10_000)
           .pcs(inst.best_index) for pid in ("ocba", "ocba+", "ocba-r+")}
    assert 0.0 < pcs["ocba"] < pcs["ocba+"]
    assert pcs["ocba"] < pcs["ocba-r+"]
