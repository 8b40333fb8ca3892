import math

import numpy as np
import pytest

from rslab import harness
from rslab.harness import ExperimentSpec, PcsCurvePoint, ResultsParseError
from rslab.oracles import TwoDesignParams
from rslab.policies import OCBA, PolicyConfig, ProblemInstance, make_policy


def small_spec(**kw):
    base = dict(
        instance_ids=("slippage-a", "equal-variances"),
        policy_configs=(PolicyConfig("ocba"), PolicyConfig("ocba-r+"), PolicyConfig("ea")),
        budgets=(100, 300, 100),
        replications=300,
        master_seed=4,
    )
    base.update(kw)
    return ExperimentSpec(**base)


class TestInstances:
    def test_six(self):
        ids = [i.id for i in harness.builtin_instances()]
        assert ids == ["ten-designs-a", "ten-designs-b", "slippage-a", "slippage-b",
                       "equal-variances", "increasing-variances"]

    def test_ten_designs_a(self):
        inst = harness.get_instance("ten-designs-a")
        assert inst.n_designs == 10
        assert inst.best_index == 9
        assert inst.gap == pytest.approx(3.2)
        assert inst.means[-1] == 5.0 and inst.stds[-1] == 20.0

    def test_slippage_b(self):
        inst = harness.get_instance("slippage-b")
        assert np.all(inst.means[:4] == inst.means[0])
        assert inst.has_unique_best

    def test_equal_variances(self):
        assert np.all(harness.get_instance("equal-variances").stds == 10.0)

    def test_unknown(self):
        with pytest.raises(KeyError, match="unknown instance"):
            harness.get_instance("nope")


class TestSpec:
    def test_budget_values(self):
        assert small_spec().budget_values == (100, 200, 300)
        assert small_spec(budgets=(200, 4000, 200)).budget_values[-1] == 4000

    @pytest.mark.parametrize("kw,exc", [
        (dict(replications=0), ValueError),
        (dict(instance_ids=("nope",)), KeyError),
        (dict(instance_ids=("slippage-a", "slippage-a")), ValueError),
        (dict(instance_ids=()), ValueError),
        (dict(policy_configs=()), ValueError),
        (dict(policy_configs=("ocba",)), TypeError),
        (dict(budgets=(300, 100, 100)), ValueError),
        (dict(budgets=(100, 300, 0)), ValueError),
        (dict(master_seed=-1), ValueError),
        (dict(master_seed=2**64), ValueError),
    ])
    def test_rejects(self, kw, exc):
        with pytest.raises(exc):
            small_spec(**kw)

    def test_infeasible_cells(self):
        spec = small_spec(instance_ids=("ten-designs-a",), budgets=(50, 150, 50))
        cells = spec.infeasible_cells()
        assert ("ten-designs-a", "ocba", 50, cells[0][3]) in cells
        assert all(c[2] < 100 or c[1] == "ocba-r+" for c in cells)


class TestSweep:
    def test_shape_and_fields(self):
        points = harness.run_sweep(small_spec())
        assert len(points) == 2 * 3 * 3
        p = points[0]
        assert (p.instance_id, p.policy_id, p.T) == ("slippage-a", "ocba", 100)
        assert p.replications == 300 and p.master_seed == 4
        assert p.n0_mode == "fixed"
        assert p.params == "delta_increment=20;exhaust_budget=true;n0=10"

    def test_std_err_formula(self):
        for p in harness.run_sweep(small_spec()):
            lhs = p.std_err**2 * p.replications
            assert lhs == pytest.approx(p.pcs_hat * (1 - p.pcs_hat), rel=4e-16, abs=1e-300)

    def test_matches_simulate(self):
        spec = small_spec(instance_ids=("slippage-a",))
        points = {(p.policy_id, p.T): p.pcs_hat for p in harness.run_sweep(spec)}
        inst = harness.get_instance("slippage-a")
        for cfg in spec.policy_configs:
            batch = cfg.to_policy().simulate(inst, 200, seed=4, replications=300)
            assert points[(cfg.policy_kind, 200)] == batch.pcs(inst.best_index)

    def test_independent_of_workers_and_blocks(self):
        spec = small_spec()
        a = harness.dumps(harness.run_sweep(spec))
        b = harness.dumps(harness.run_sweep(spec, workers=2, block=37))
        c = harness.dumps(harness.run_sweep(spec, block=1000))
        assert a == b == c

    def test_seed_changes_results(self):
        a = harness.dumps(harness.run_sweep(small_spec()))
        b = harness.dumps(harness.run_sweep(small_spec(master_seed=5)))
        assert a != b

    def test_single_replication(self):
        for p in harness.run_sweep(small_spec(replications=1)):
            assert p.pcs_hat in (0.0, 1.0)
            assert p.std_err == 0.0

    def test_easy_instance(self):
        inst = ProblemInstance([0.0, 100.0], [1.0, 1.0], "far-apart")
        spec = ExperimentSpec(("far-apart",), (PolicyConfig("ea"),), (20, 20, 1), 10_000,
                              instances=(inst,))
        (point,) = harness.run_sweep(spec)
        assert point.pcs_hat == 1.0 and point.std_err == 0.0

    def test_more_budget_helps_equal_allocation(self):
        spec = small_spec(policy_configs=(PolicyConfig("ea"),), budgets=(100, 2000, 1900),
                          replications=2000)
        pts = harness.run_sweep(spec)
        by = {(p.instance_id, p.T): p.pcs_hat for p in pts}
        for inst in ("slippage-a", "equal-variances"):
            assert by[(inst, 2000)] > by[(inst, 100)]

    def test_infeasible_cells_isolated(self):
        errors = []
        spec = small_spec(instance_ids=("ten-designs-a",), budgets=(50, 150, 50))
        points = harness.run_sweep(spec, errors=errors)
        got = {(p.policy_id, p.T) for p in points}
        assert ("ocba", 50) not in got and ("ocba", 100) in got
        assert any(e.policy_id == "ocba" and e.T == 50 for e in errors)
        assert ("ea", 50) in got

    def test_instance_without_unique_best(self):
        tied = ProblemInstance([1.0, 1.0], [1.0, 1.0], "tied")
        spec = ExperimentSpec(("tied", "slippage-a"), (PolicyConfig("ea"),), (10, 20, 10), 10,
                              instances=(tied,))
        errors = []
        points = harness.run_sweep(spec, errors=errors)
        assert {p.instance_id for p in points} == {"slippage-a"}
        assert len(errors) == 2 and "unique best" in errors[0].message


class TestPersistence:
    def test_round_trip(self, tmp_path):
        points = harness.run_sweep(small_spec(replications=77))
        path = tmp_path / "r.csv"
        harness.persist(points, path)
        assert harness.load(path) == points

    def test_round_trip_extreme_values(self):
        p = PcsCurvePoint("x,y", 'ocba"+', 5, 1 / 3, math.sqrt(2 / 9 / 7), 7, 2**64 - 1,
                          "linear", "alpha0=0.2")
        assert harness.loads(harness.dumps([p])) == [p]

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        harness.persist([], path)
        assert path.read_text() == ",".join(harness.HEADER) + "\n"
        assert harness.load(path) == []

    def test_one_row(self):
        p = PcsCurvePoint("a", "ea", 10, 0.5, 0.1, 25, 0)
        lines = harness.dumps([p]).splitlines()
        assert len(lines) == 2
        assert len(lines[1].split(",")) == 9

    @pytest.mark.parametrize("text,line,column", [
        ("", 1, None),
        ("a,b\n", 1, None),
        (",".join(harness.HEADER) + "\nx,ea,10,0.5\n", 2, None),
        (",".join(harness.HEADER) + "\nx,ea,10,0.5,0.1,25,0,none,\nx,ea,ten,0.5,0.1,25,0,none,\n", 3, 3),
        (",".join(harness.HEADER) + "\nx,ea,10,1.5,0.1,25,0,none,\n", 2, None),
    ])
    def test_parse_errors(self, text, line, column):
        with pytest.raises(ResultsParseError) as info:
            harness.loads(text, source="f.csv")
        assert info.value.line == line
        assert info.value.column == column
        assert str(info.value).startswith(f"f.csv: line {line}")


class TestConditional:
    def test_agrees_with_indicator_estimate(self):
        params = TwoDesignParams(1.0, 1.0, 1.0)
        inst = ProblemInstance.two_designs(1.0, 1.0, 1.0)
        policy = OCBA(n0=5)
        est = harness.conditional_pfs(policy, params, 20, seed=3, replications=40_000)
        batch = policy.simulate(inst, 20, seed=3, replications=40_000)
        mc = 1 - batch.pcs(0)
        se = math.sqrt(mc * (1 - mc) / 40_000)
        assert abs(est.pfs - mc) < 3 * math.hypot(se, est.std_err)
        assert est.std_err < se
        assert est.log_pfs == pytest.approx(math.log(est.pfs))

    def test_curve_shares_samples(self):
        params = TwoDesignParams(1.0, 1.0, 2.0)
        pols = [OCBA(n0=2), make_policy("ocba+", alpha0=0.25)]
        curve = harness.conditional_pfs_curve(pols, params, [20, 40], seed=1, replications=500,
                                              max_block_bytes=4096)
        single = harness.conditional_pfs(pols[1], params, 40, seed=1, replications=500)
        assert curve[("ocba+", 40)] == single
        assert set(curve) == {("ocba", 20), ("ocba", 40), ("ocba+", 20), ("ocba+", 40)}

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            harness.conditional_pfs_curve([OCBA(), OCBA()], TwoDesignParams(1, 1, 1), [40])
