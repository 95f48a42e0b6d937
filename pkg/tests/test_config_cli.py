import json
import os
import textwrap

import pytest

from nldecay import cli, runner
from nldecay.config import load_config, parse_mapping
from nldecay.errors import ConfigError

SURROGATE = """\
name: quick
kind: surrogate
functions:
  a: power_law(1, 0.5)
  b: power_law(1, 2)
  g_rhs: monomial(1, 1)
theorems: [thm-2.11]
solver: {dt: 0.01, t_end: 400, record_every: 10, g0: 1}
verdict: {eps: 0.05}
expect: {verdict: decays}
"""

PDE_MISSING_GAMMA = """\
name: heat
kind: pde
pde: {n: 20}
"""


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return str(path)


class TestConfig:
    def test_loads_surrogate(self, tmp_path):
        sc = load_config(write(tmp_path, SURROGATE))
        assert sc.kind == "surrogate" and list(sc.theorems) == ["thm-2.11"]
        assert sc.solver.t_end == 400 and sc.verdict_eps == 0.05
        assert sc.inputs.a(3.0) == pytest.approx(0.5)

    def test_missing_field_reports_line(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, PDE_MISSING_GAMMA))
        assert info.value.field == "functions.gamma"
        assert info.value.line == 2

    def test_bad_descriptor_reports_field_and_line(self, tmp_path):
        text = SURROGATE.replace("power_law(1, 2)", "power_lax(1, 2)")
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, text))
        assert info.value.field == "functions.b" and info.value.line == 5

    @pytest.mark.parametrize("raw", [
        {"kind": "surrogate-ish"},
        {"kind": "check-only", "bogus": 1},
        {"kind": "check-only", "functions": {"phi": "constant(1)"}, "seed": -1},
        {"kind": "check-only", "functions": {"phi": "constant(1)"}, "check": {"horizon": -5}},
        {"kind": "check-only", "functions": {"phi": "constant(1)"}, "check": {"unknown": 1}},
        {"kind": "check-only", "functions": {"phi": "constant(1)"}, "expect": {"thm-2.1": "maybe"}},
        {"kind": "check-only"},
        [1, 2],
    ])
    def test_invalid_mappings(self, raw):
        with pytest.raises(ConfigError):
            parse_mapping(raw)

    def test_invalid_yaml(self, tmp_path):
        with pytest.raises(ConfigError, match="line"):
            load_config(write(tmp_path, "kind: [unclosed\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "nope.yaml"))

    def test_overrides(self, tmp_path):
        sc = load_config(write(tmp_path, SURROGATE), {"t_end": 50.0, "tol": 1e-4, "seed": 7, "out_dir": "x"})
        assert sc.solver.t_end == 50.0 and sc.check.tol == 1e-4 and sc.seed == 7 and sc.out_dir == "x"

    def test_hash_ignores_output_dir(self, tmp_path):
        a = load_config(write(tmp_path, SURROGATE), {"out_dir": "one"})
        b = load_config(write(tmp_path, SURROGATE), {"out_dir": "two"})
        c = load_config(write(tmp_path, SURROGATE), {"t_end": 10.0})
        assert a.config_hash == b.config_hash != c.config_hash

    def test_catalog_kind_merges_user_expectations(self):
        sc = parse_mapping({"kind": "catalog", "catalog": "remark-2-2", "expect": {"thm-2.1": "fail"}})
        assert sc.kind == "check-only" and sc.expect["thm-2.1"] == "fail"

    def test_tabulated_paths_resolve_against_config_dir(self, tmp_path):
        (tmp_path / "b.csv").write_text("t,value\n0,0\n1e6,0\n")
        text = SURROGATE.replace("b: power_law(1, 2)", 'b: tabulated("b.csv")')
        sc = load_config(write(tmp_path, text))
        assert sc.functions["b"](10.0) == 0.0


class TestRunner:
    def test_surrogate_outputs(self, tmp_path, tmp_out):
        code, report = runner.run_scenario(load_config(write(tmp_path, SURROGATE)), tmp_out)
        assert code == runner.EXIT_OK
        assert sorted(os.listdir(tmp_out)) == ["report.json", "trajectory.csv"]
        with open(os.path.join(tmp_out, "trajectory.csv")) as fh:
            assert fh.readline().strip() == "t,value"
        on_disk = json.load(open(os.path.join(tmp_out, "report.json")))
        assert on_disk == report
        assert {"scenario", "theorem", "verdict", "config_hash"} <= set(report)
        cond = report["theorem"][0]["conditions"][0]
        assert set(cond) == {"condition", "status", "witness", "horizon"}

    def test_pde_outputs(self, tmp_out):
        sc = parse_mapping({
            "name": "heat", "kind": "pde", "functions": {"gamma": "constant(1)"},
            "solver": {"dt": 0.01, "t_end": 20.0},
            "pde": {"n": 20, "u0": "sin", "nonlinearity": "cubic", "snapshots": [1, 2, 5]},
            "verdict": {"eps": 0.05},
        })
        code, report = runner.run_scenario(sc, tmp_out)
        assert code == runner.EXIT_OK, report["expectations"]
        assert sorted(os.listdir(os.path.join(tmp_out, "snapshots"))) == [
            "snapshot_000.csv", "snapshot_001.csv", "snapshot_002.csv"]
        assert {"bound.csv", "trajectory.csv"} <= set(os.listdir(tmp_out))
        with open(os.path.join(tmp_out, "snapshots", "snapshot_000.csv")) as fh:
            assert fh.readline().startswith("x,")

    def test_inconclusive_exit(self, tmp_path, tmp_out):
        # g' = -g^3/(1+t) decays like (log t)^-1/2, too slowly to decide at t = 50
        sc = parse_mapping({
            "name": "slow", "kind": "surrogate",
            "functions": {"a": "power_law(1, 1)", "b": "constant(0)", "g_rhs": "monomial(1, 3)"},
            "solver": {"dt": 0.01, "t_end": 50.0}, "verdict": {"eps": 0.01},
        })
        code, report = runner.run_scenario(sc, tmp_out)
        assert report["verdict"]["status"] == "inconclusive"
        assert code == runner.EXIT_INCONCLUSIVE

    def test_abort_is_partial(self, tmp_out):
        # f(0) != 0 is rejected by the solver after the hypothesis stage has run
        sc = parse_mapping({
            "name": "bad", "kind": "surrogate",
            "functions": {"a": "constant(1)", "b": "constant(0)", "g_rhs": "constant(1)"},
            "solver": {"dt": 0.1, "t_end": 1.0},
        })
        code, report = runner.run_scenario(sc, tmp_out)
        assert code == runner.EXIT_VIOLATED and report["partial"] and report["error"]

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        sc = parse_mapping({"kind": "catalog", "catalog": "remark-2-2"})
        with pytest.raises(ConfigError):
            runner.run_scenario(sc, str(blocker / "sub"))

    def test_determinism(self, tmp_path):
        sc = parse_mapping({"kind": "catalog", "catalog": "thm-2-13-pass", "seed": 3})
        paths = []
        for i in range(2):
            out = tmp_path / f"run{i}"
            runner.run_scenario(sc, str(out))
            paths.append(out)
        for name in ("report.json", "trajectory.csv", "trajectory_s.csv"):
            assert (paths[0] / name).read_bytes() == (paths[1] / name).read_bytes()


class TestCLI:
    def test_catalog_pass(self, tmp_out, capsys):
        assert cli.main(["catalog", "thm-2-11-pass", "--out-dir", tmp_out]) == 0
        out = capsys.readouterr().out
        assert "thm-2.11" in out and "decays" in out

    def test_list_catalog(self, capsys):
        assert cli.main(["list-catalog"]) == 0
        assert "remark-2-2" in capsys.readouterr().out

    def test_missing_gamma(self, tmp_path, capsys):
        assert cli.main(["pde", "--config", write(tmp_path, PDE_MISSING_GAMMA)]) == 3
        assert "functions.gamma" in capsys.readouterr().err

    def test_inverted_expectation(self, tmp_path, tmp_out):
        path = write(tmp_path, "kind: catalog\ncatalog: remark-2-2\nexpect: {thm-2.1: fail}\n")
        assert cli.main(["catalog", "--config", path, "--out-dir", tmp_out]) == 1

    def test_wrong_subcommand_for_kind(self, tmp_path):
        assert cli.main(["pde", "--config", write(tmp_path, SURROGATE)]) == 3

    def test_check_skips_solver(self, tmp_path, tmp_out):
        assert cli.main(["check", "--config", write(tmp_path, SURROGATE), "--out-dir", tmp_out]) == 0
        assert os.listdir(tmp_out) == ["report.json"]

    def test_peano(self, tmp_path, tmp_out):
        path = write(tmp_path, "kind: peano\npeano: {n_list: [1, 8, 16], dt: 0.001}\nexpect: {peano: pass}\n")
        assert cli.main(["peano", "--config", path, "--out-dir", tmp_out]) == 0

    @pytest.mark.parametrize("argv", [[], ["frobnicate"], ["simulate"], ["catalog", "no-such-case"],
                                      ["simulate", "--config", "x.yaml", "--t-end", "soon"]])
    def test_usage_errors(self, argv, capsys):
        assert cli.main(argv) == 3

    def test_flag_overrides(self, tmp_path, tmp_out):
        code = cli.main(["simulate", "--config", write(tmp_path, SURROGATE), "--out-dir", tmp_out,
                         "--t-end", "100", "--seed", "5", "--tol", "1e-5"])
        report = json.load(open(os.path.join(tmp_out, "report.json")))
        assert code == 0 and report["seed"] == 5 and report["trajectory"]["horizon"] == pytest.approx(100.0)
