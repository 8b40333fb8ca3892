import json
import math
import xml.etree.ElementTree as ET

import pytest

from rslab import harness
from rslab.cli import main
from rslab.harness import PcsCurvePoint
from rslab.plot import render_svg

SVG = "{http://www.w3.org/2000/svg}"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


class TestInstances:
    def test_all(self, capsys):
        code, out, _ = run_cli(capsys, "instances")
        lines = out.strip().splitlines()
        assert code == 0
        assert lines[0] == "id\tK\tmeans\tstds"
        assert len(lines) == 7

    def test_one(self, capsys):
        code, out, _ = run_cli(capsys, "instances", "--id", "ten-designs-a")
        rows = out.strip().splitlines()[1:]
        assert code == 0 and len(rows) == 1
        _, k, means, stds = rows[0].split("\t")
        assert k == "10"
        assert means.rstrip("]").split(",")[-1].strip() in ("5", "5.0")
        assert stds.rstrip("]").split(",")[-1].strip() in ("20", "20.0")

    def test_unknown(self, capsys):
        code, out, err = run_cli(capsys, "instances", "--id", "nope")
        assert code != 0 and out == ""
        assert "unknown instance" in err


class TestRun:
    args = ["run", "--instance", "slippage-a,equal-variances", "--policies", "ocba,ocba-r+",
            "--budgets", "100:300:100", "--reps", "200", "--seed", "3"]

    def test_writes_results(self, capsys, tmp_path):
        out_path = tmp_path / "r.csv"
        code, out, err = run_cli(capsys, *self.args, "--out", str(out_path))
        assert code == 0
        points = harness.load(out_path)
        assert len(points) == 2 * 2 * 3
        assert {p.master_seed for p in points} == {3}
        assert "slippage-a" in out and f"wrote 12 rows to {out_path}" in out

    def test_rerun_byte_identical(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(capsys, *self.args, "--out", str(a))[0] == 0
        assert run_cli(capsys, *self.args, "--out", str(b), "--workers", "2")[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_zero_reps(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "run", "--reps", "0", "--out", str(tmp_path / "x.csv"))
        assert code == 2 and "--reps" in err

    def test_unused_parameter(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, *self.args, "--p", "0.3", "--out", str(tmp_path / "x.csv"))
        assert code != 0 and "--p" in err

    def test_missing_out(self, capsys):
        code, _, err = run_cli(capsys, *self.args)
        assert code == 2 and "--out" in err

    def test_config_file_and_override(self, capsys, tmp_path, monkeypatch):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"instance": ["slippage-a"], "policies": "ea,ocba+",
                                   "budgets": [100, 200, 100], "reps": 5000, "seed": 9}))
        out_path = tmp_path / "r.csv"
        code, _, _ = run_cli(capsys, "run", "--config", str(cfg), "--reps", "50",
                             "--out", str(out_path))
        assert code == 0
        points = harness.load(out_path)
        assert {p.replications for p in points} == {50}
        assert {p.master_seed for p in points} == {9}
        assert {p.policy_id for p in points} == {"ea", "ocba+"}

    def test_config_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"colour": "red"}))
        code, _, err = run_cli(capsys, "run", "--config", str(cfg), "--out", str(tmp_path / "x"))
        assert code == 2 and "unknown key" in err

    def test_seed_from_environment(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("RSLAB_SEED", "17")
        out_path = tmp_path / "r.csv"
        assert run_cli(capsys, *self.args[:-2], "--out", str(out_path))[0] == 0
        assert {p.master_seed for p in harness.load(out_path)} == {17}

    @pytest.mark.slow
    def test_documented_example(self, capsys, tmp_path):
        out_path = tmp_path / "r.csv"
        code, _, _ = run_cli(capsys, "run", "--instance", "ten-designs-a", "--policies",
                             "ocba,ocba+,ocba-d+,ocba-r+", "--budgets", "200:4000:200",
                             "--reps", "10000", "--seed", "1", "--out", str(out_path))
        assert code == 0
        assert len(harness.load(out_path)) == 80


class TestRates:
    def test_symmetric(self, capsys):
        code, out, _ = run_cli(capsys, "rates", "--delta", "1", "--sigma1", "1", "--sigma2", "1",
                               "--p", "0.5", "--alpha0", "0.2")
        kv = parse_kv(out)
        assert code == 0
        assert float(kv["optimal_ds"]) == 0.125
        assert float(kv["ea"]) == 0.125
        assert float(kv["rs"]) <= 0.125 and float(kv["rs"]) <= math.log(2)
        assert float(kv["p_star"]) == 0.5

    def test_invalid(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["rates", "--delta", "1", "--sigma1", "0", "--sigma2", "1"])
        assert info.value.code == 2


class TestBounds:
    def test_upper(self, capsys):
        code, out, _ = run_cli(capsys, "bounds", "--instance", "slippage-a", "--alpha0", "0.2",
                               "--t", "2000")
        kv = parse_kv(out)
        assert code == 0
        assert 0.0 <= float(kv["upper_bound"]) <= 1.0

    def test_lower(self, capsys):
        code, out, _ = run_cli(capsys, "bounds", "--two-design", "--delta", "1", "--sigma1", "1",
                               "--sigma2", "1", "--t", "100")
        assert code == 0
        assert float(parse_kv(out)["lower_bound"]) == pytest.approx(2.87e-7, rel=2e-3)

    def test_missing_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["bounds", "--instance", "slippage-a", "--alpha0", "0.2"])
        assert info.value.code == 2
        with pytest.raises(SystemExit) as info:
            main(["bounds", "--t", "100"])
        assert info.value.code == 2


class TestOracle:
    def test_values(self, capsys):
        code, out, _ = run_cli(capsys, "oracle", "ds", "--delta", "1", "--sigma1", "1",
                               "--sigma2", "1", "--p", "0.5", "--t", "8")
        assert code == 0
        assert float(parse_kv(out)["pfs"]) == pytest.approx(0.07864960352514257, rel=1e-13)
        code, out, _ = run_cli(capsys, "oracle", "density", "--n0", "2", "--sigma1", "1",
                               "--sigma2", "1", "--x", "0.5")
        assert float(parse_kv(out)["density"]) == pytest.approx(4 / math.pi, rel=1e-14)

    def test_infeasible(self, capsys):
        code, _, err = run_cli(capsys, "oracle", "two-phase", "--delta", "1", "--sigma1", "1",
                               "--sigma2", "1", "--alpha0", "0.2", "--t", "10")
        assert code == 2 and "phase-I" in err


def _points(instances, policies):
    out = []
    for inst in instances:
        for pid in policies:
            for t, v in ((100, 0.4), (200, 0.7), (300, 0.9)):
                se = math.sqrt(v * (1 - v) / 100)
                out.append(PcsCurvePoint(inst, pid, t, v, se, 100, 0))
    return out


class TestPlot:
    def test_six_charts(self, capsys, tmp_path):
        ids = [i.id for i in harness.builtin_instances()]
        src, dst = tmp_path / "r.csv", tmp_path / "r.svg"
        harness.persist(_points(ids, ["ocba", "ocba-r+"]), src)
        code, out, _ = run_cli(capsys, "plot", "--in", str(src), "--out", str(dst))
        assert code == 0 and "6 charts" in out
        root = ET.parse(dst).getroot()
        panels = root.findall(f".//{SVG}g[@class='panel']")
        assert [p.get("data-instance") for p in panels] == ids
        circles = root.findall(f".//{SVG}circle[@class='point']")
        assert len(circles) == 6 * 2 * 3
        first = circles[0]
        assert float(first.get("data-pcs")) == 0.4
        assert float(first.get("data-se")) == pytest.approx(math.sqrt(0.24 / 100), rel=1e-15)
        legend = root.findall(f".//{SVG}g[@class='legend-item']")
        assert [g.get("data-policy") for g in legend] == ["ocba", "ocba-r+"]

    def test_single_policy(self):
        root = ET.fromstring(render_svg(_points(["a"], ["ea"])))
        assert len(root.findall(f".//{SVG}g[@class='series']")) == 1
        assert len(root.findall(f".//{SVG}line[@class='whisker']")) == 3

    def test_empty(self, capsys, tmp_path):
        src = tmp_path / "e.csv"
        harness.persist([], src)
        code, _, err = run_cli(capsys, "plot", "--in", str(src), "--out", str(tmp_path / "e.svg"))
        assert code != 0 and "no rows" in err

    def test_parse_error_reports_row(self, capsys, tmp_path):
        src = tmp_path / "bad.csv"
        src.write_text(",".join(harness.HEADER) + "\nx,ea,ten,0.5,0.1,25,0,none,\n")
        code, _, err = run_cli(capsys, "plot", "--in", str(src), "--out", str(tmp_path / "b.svg"))
        assert code == 1 and "line 2" in err

    def test_missing_input(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "plot", "--in", str(tmp_path / "none.csv"),
                               "--out", str(tmp_path / "x.svg"))
        assert code == 1 and err
