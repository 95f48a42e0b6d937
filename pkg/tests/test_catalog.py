"""Every stored catalog expectation is asserted here exactly as written."""

import math
import warnings

import numpy as np
import pytest

from nldecay import runner
from nldecay.catalog import catalog_case, list_catalog
from nldecay.errors import CatalogLookupError
from nldecay.funcspace import parse_bivariate
from nldecay.hypothesis import CheckConfig, build_F, regularity_profile, uc_certificate

IDS = [cid for cid, _ in list_catalog()]


@pytest.fixture(scope="module")
def runs():
    cache = {}

    def get(cid):
        if cid not in cache:
            case = catalog_case(cid)
            res = runner.run_pipeline(case.scenario)
            cache[cid] = (case, res, runner.evaluate(res))
        return cache[cid]

    return get


def test_ids_are_stable():
    assert IDS == ["alpha-gt-1", "pde-example", "peano-linear", "remark-2-2", "thm-2-11-divergence-fail",
                   "thm-2-11-pass", "thm-2-13-pass"]


def test_unknown_id():
    with pytest.raises(CatalogLookupError, match="known"):
        catalog_case("remark-9-9")


@pytest.mark.filterwarnings("ignore:regularity_profile")
@pytest.mark.parametrize("cid", IDS)
def test_case_meets_its_expectations(runs, cid):
    _, res, (rows, code) = runs(cid)
    assert res.error is None
    assert all(r["met"] for r in rows), rows
    assert code == runner.EXIT_OK


@pytest.mark.parametrize("cid", IDS)
def test_theorem_expectations_match_stored_table(runs, cid):
    case, res, _ = runs(cid)
    reports = dict(res.theorems)
    for key, want in case.expected.items():
        if key in reports:
            assert reports[key].status == want
        if key == "verdict":
            assert res.verdict.status == want


def test_piecewise_majorant_table():
    case = catalog_case("remark-2-2")
    table = case.expected["F"]
    f = parse_bivariate(case.scenario.raw["functions"]["f"])
    grid = np.linspace(0.0, case.expected["uc_certificate"]["horizon"], 4001)
    for v, value in table["values"].items():
        assert abs(build_F(f, v, grid)(table["t"]) - value) <= table["tol"]


def test_piecewise_certificate_table():
    case = catalog_case("remark-2-2")
    table = case.expected["uc_certificate"]
    f = parse_bivariate(case.scenario.raw["functions"]["f"])
    grid = np.linspace(0.0, table["horizon"], 4001)
    cfg = CheckConfig(horizon=table["horizon"], deltas=(table["delta"],))
    for status in ("pass", "fail"):
        for v in table[status]:
            assert uc_certificate(build_F(f, v, grid), cfg).status == status


def test_alpha_table():
    case = catalog_case("alpha-gt-1")
    table = case.expected["regularity_profile"]
    phi = case.scenario.functions["phi"]
    assert phi.alpha == table["alpha"]
    for C in table["C"]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = regularity_profile(phi, C, case.scenario.check)
        assert rep.record(case.expected["failing_condition"]).status == table["limit"]


def test_alpha_failing_condition(runs):
    case, res, _ = runs("alpha-gt-1")
    rec = dict(res.theorems)["cor-2.9"].record(case.expected["failing_condition"])
    assert rec.status == "fail"


def test_power_rate_surrogate_endpoint(runs):
    case, res, _ = runs("thm-2-11-pass")
    assert res.trajectory.t_end == pytest.approx(1e4)
    assert res.trajectory.values[-1] <= case.expected["g_end_max"]


def test_divergence_witness(runs):
    case, res, _ = runs("thm-2-11-divergence-fail")
    exp = case.expected
    rep = dict(res.theorems)["thm-2.11"]
    assert rep.status == exp["thm-2.11"]
    assert rep.record(exp["failing_condition"]).status == "fail"
    assert res.verdict.status == exp["verdict"]
    assert abs(res.verdict.limit - exp["floor"]) <= exp["floor_tol"]
    # closed form g(t) = exp(-(1 - e^-t))
    t = res.trajectory.times
    assert np.allclose(res.trajectory.values, np.exp(-(1 - np.exp(-t))), atol=1e-9)


def test_time_map_tolerances(runs):
    case, res, _ = runs("thm-2-13-pass")
    tm = res.extra["time_map"]
    assert tm["roundtrip_error"] <= case.expected["roundtrip_tol"]
    assert tm["increment_margin"] <= case.expected["increment_tol"]


def test_pde_example_bounds(runs):
    case, res, _ = runs("pde-example")
    info = res.extra["pde"]
    assert info["sup_norm"] <= case.expected["sup_bound"]
    assert info["max_excess_over_bound"] <= case.expected["bound_slack"]
    assert res.checks == {"bound": "pass", "probe": "pass"}


def test_peano_table(runs):
    case, res, _ = runs("peano-linear")
    info = res.extra["peano"]
    assert info["n1_vs_linear"] <= case.expected["n1_tol"]
    assert all(r <= case.expected["ratio_max"] for r in info["ratios"].values())
    assert math.isfinite(info["errors"]["64"])


def test_soundness_all_pass_cases_decay(runs):
    for cid in IDS:
        _, res, _ = runs(cid)
        if res.theorems and all(rep.status == "pass" for _, rep in res.theorems) and res.verdict is not None:
            assert res.verdict.status == "decays", cid
