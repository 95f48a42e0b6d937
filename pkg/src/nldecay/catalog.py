"""Built-in scenarios with stored expected outcomes.

Each case is an ordinary scenario mapping plus an ``expected`` table that
the test suite asserts verbatim.  Ids are stable public strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import CatalogLookupError

PIECEWISE_F = "where(y <= 1, 1, 1 + (y - 1) * x)"


@dataclass(frozen=True)
class CatalogCase:
    id: str
    description: str
    scenario: object  # ScenarioConfig
    expected: dict = field(default_factory=dict)


_CASES = {
    "remark-2-2": dict(
        description="Piecewise f whose majorant F(t, v) is uniformly continuous iff v <= 1.",
        raw={
            "name": "remark-2-2", "kind": "check-only",
            "functions": {"f": PIECEWISE_F},
            "parameters": {"state_bound": 1.0},
            "theorems": ["thm-2.1"],
            "check": {"horizon": 200.0, "deltas": [0.1]},
            "expect": {"thm-2.1": "pass"},
        },
        expected={
            "F": {"t": 2.0, "values": {1.0: 2.0, 2.0: 4.0}, "tol": 1e-6},
            "uc_certificate": {"horizon": 200.0, "delta": 0.1, "pass": [0.25, 0.5, 1.0], "fail": [1.5, 2.0]},
        },
    ),
    "alpha-gt-1": dict(
        description="phi = (1+t)^-1.5 breaks lim (t - C/phi(t)) = inf for every C.",
        raw={
            "name": "alpha-gt-1", "kind": "check-only",
            "functions": {"phi": "power_law(1, 1.5)", "h": "power_law(1, 3)"},
            "parameters": {"C": 0.5},
            "theorems": ["cor-2.9"],
            "expect": {"cor-2.9": "fail"},
        },
        expected={
            "regularity_profile": {"alpha": 1.5, "C": [0.1, 0.5, 1.0, 10.0], "limit": "fail"},
            "failing_condition": "lim t - C/phi(t) = inf",
        },
    ),
    "thm-2-11-pass": dict(
        description="a = (1+t)^-1/2, b = (1+t)^-2, f(g) = g: hypotheses hold and g decays.",
        raw={
            "name": "thm-2-11-pass", "kind": "surrogate",
            "functions": {"a": "power_law(1, 0.5)", "b": "power_law(1, 2)", "g_rhs": "monomial(1, 1)"},
            "theorems": ["thm-2.11"],
            "solver": {"scheme": "rk4", "dt": 0.01, "t_end": 10000.0, "record_every": 100, "g0": 1.0},
            "verdict": {"eps": 0.05},
            "expect": {"thm-2.11": "pass", "verdict": "decays"},
        },
        expected={"thm-2.11": "pass", "verdict": "decays", "g_end_max": 0.05},
    ),
    "thm-2-11-divergence-fail": dict(
        description="a = e^-t has finite integral, so g stalls at exp(-1).",
        raw={
            "name": "thm-2-11-divergence-fail", "kind": "surrogate",
            "functions": {"a": "exponential(1, 1)", "b": "constant(0)", "g_rhs": "monomial(1, 1)"},
            "theorems": ["thm-2.11"],
            "solver": {"scheme": "rk4", "dt": 0.01, "t_end": 64.0, "g0": 1.0},
            "verdict": {"eps": 0.05},
            "expect": {"thm-2.11": "fail", "verdict": "no_decay", "floor": math.exp(-1.0), "floor_tol": 1e-3},
        },
        expected={"thm-2.11": "fail", "failing_condition": "int a = inf", "verdict": "no_decay",
                  "floor": math.exp(-1.0), "floor_tol": 1e-3},
    ),
    "thm-2-13-pass": dict(
        description="Integrable beta along the clock s = int a; the transformed trajectory decays.",
        raw={
            "name": "thm-2-13-pass", "kind": "surrogate",
            "functions": {"a": "power_law(1, 0.5)", "b": "power_law(1, 2)", "g_rhs": "monomial(1, 1)"},
            "theorems": ["thm-2.13"],
            "solver": {"scheme": "rk4", "dt": 0.01, "t_end": 10000.0, "record_every": 100, "g0": 1.0,
                       "time_map": True},
            "verdict": {"eps": 0.05},
            "expect": {"thm-2.13": "pass", "verdict": "decays"},
        },
        expected={"thm-2.13": "pass", "verdict": "decays", "roundtrip_tol": 1e-9, "increment_tol": 1e-6},
    ),
    "pde-example": dict(
        description="u' = gamma(t)[u_xx - u^3] + f on (0, pi), gamma = (1+t)^-1/2, |f| = 0.5 (1+t)^-2.",
        raw={
            "name": "pde-example", "kind": "pde",
            "functions": {"gamma": "power_law(1, 0.5)"},
            "parameters": {"alpha": 0.5, "k": 2.0},
            "theorems": ["thm-3.3/C"],
            "solver": {"dt": 0.01, "t_end": 10000.0, "record_every": 100},
            "pde": {"n": 100, "u0": "zero", "profile": "sin", "amplitude": "power_law(0.5, 2)",
                    "nonlinearity": "cubic", "snapshots": [1.0, 10.0, 100.0], "probe_pairs": 200},
            "verdict": {"eps": 0.05},
            "expect": {"thm-3.3/C": "pass", "verdict": "decays", "bound": "pass", "probe": "pass"},
        },
        expected={"thm-3.3/C": "pass", "verdict": "decays", "sup_bound": 1.0, "bound_slack": 1e-3},
    ),
    "peano-linear": dict(
        description="Delayed-argument iterates for u' = -u, u(0) = 1 on [0, 1].",
        raw={
            "name": "peano-linear", "kind": "peano",
            "peano": {"rate": 1.0, "u0": 1.0, "n_list": [1, 8, 16, 32, 64], "t_end": 1.0, "dt": 1e-4},
            "expect": {"peano": "pass"},
        },
        expected={"n1_tol": 1e-3, "ratio_max": 0.75},
    ),
}


def list_catalog() -> list:
    """``(id, description)`` pairs in id order."""
    return [(cid, _CASES[cid]["description"]) for cid in sorted(_CASES)]


def catalog_case(case_id: str) -> CatalogCase:
    if case_id not in _CASES:
        raise CatalogLookupError(f"unknown catalog id {case_id!r}; known: {', '.join(sorted(_CASES))}")
    from .config import parse_mapping

    entry = _CASES[case_id]
    return CatalogCase(case_id, entry["description"], parse_mapping(entry["raw"]), entry["expected"])
