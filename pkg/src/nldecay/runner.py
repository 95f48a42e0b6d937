"""Scenario pipeline: hypotheses, then solve, then verdict, then files on disk.

Exit codes: 0 all expectations met, 1 an expectation violated or the run
aborted, 2 inconclusive results present, 3 usage or configuration error.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import hypothesis, odesolve, pde, verdict
from .errors import ConfigError, NldecayError
from .funcspace import parse_fn
from .odesolve import Trajectory

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VIOLATED, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 3


@dataclass
class Results:
    scenario: object
    theorems: list = field(default_factory=list)
    verdict: verdict.DecayVerdict | None = None
    trajectory: Trajectory | None = None
    snapshots: dict = field(default_factory=dict)
    snapshot_x: np.ndarray | None = None
    bound: Trajectory | None = None
    extra: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)  # name -> pass | fail | inconclusive
    partial: bool = False
    error: str | None = None


def _clean(obj):
    """JSON-safe copy with non-finite floats spelled out and numpy scalars unwrapped."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# pipelines per kind
# ---------------------------------------------------------------------------


def _hypotheses(sc, res, inputs=None):
    pairs = hypothesis.applicable_theorems(inputs or sc.inputs, sc.check, sc.theorems)
    res.theorems = pairs


def _run_surrogate(sc, res):
    _hypotheses(sc, res)
    fn = sc.functions
    g0 = float(sc.parameters.get("g0", 1.0))
    traj = odesolve.solve_surrogate(fn["a"], fn["g_rhs"], fn["b"], g0, sc.solver)
    res.trajectory = traj
    res.partial = not traj.complete
    if sc.parameters.get("time_map"):
        clock = odesolve.reparameterize(fn["a"], traj.t_end)
        rng = np.random.default_rng(sc.seed)
        pts = rng.uniform(0.0, traj.t_end, 100)
        roundtrip = float(np.max(np.abs(clock.inverse(clock.forward(pts)) - pts)))
        w = odesolve.transform_trajectory(traj, clock)
        worst, ok = odesolve.increment_check(w, clock, fn["b"], seed=sc.seed)
        res.extra["time_map"] = {"s_end": clock.s_end, "roundtrip_error": roundtrip,
                                 "increment_margin": worst, "horizon": traj.t_end}
        res.checks["roundtrip"] = "pass" if roundtrip <= 1e-9 else "fail"
        res.checks["increment"] = "pass" if ok else "fail"
        res.extra["w_trajectory"] = w
        res.verdict = verdict.decay_verdict(w, sc.verdict_eps)
    else:
        res.verdict = verdict.decay_verdict(traj, sc.verdict_eps)


def _initial_state(desc, grid, scale):
    if isinstance(desc, (list, tuple)):
        u0 = np.asarray(desc, dtype=float)
        if u0.shape != (grid.n,):
            raise ConfigError(f"u0 has {u0.size} values, grid has {grid.n}", field="pde.u0")
        return u0 * scale
    return pde.profile_shape(desc, grid, normalize=False) * scale


def _run_pde(sc, res):
    cfg = sc.pde
    grid = pde.Grid1D(int(cfg.get("n", 100)), float(cfg.get("length", math.pi)))
    amplitude = parse_fn(cfg.get("amplitude", "constant(0)"), sc.base_dir)
    profile = pde.profile_shape(cfg.get("profile", "zero"), grid)
    u0 = _initial_state(cfg.get("u0", "zero"), grid, float(cfg.get("u0_scale", 1.0)))
    scenario = pde.PDEScenario(sc.functions["gamma"], u0, amplitude, profile,
                               cfg.get("nonlinearity", "cubic"), float(cfg.get("p", 3.0)),
                               sc.parameters.get("k"))
    beta = sc.functions.get("beta") or scenario.fnorm(grid)
    _hypotheses(sc, res, replace(sc.inputs, beta=beta))
    snaps = [float(t) for t in cfg.get("snapshots", [])]
    run = pde.simulate(scenario, grid, sc.solver, snaps)
    res.trajectory = run.norm
    res.snapshots = run.snapshots
    res.snapshot_x = grid.x
    res.partial = not run.complete
    res.verdict = verdict.decay_verdict(run.norm, sc.verdict_eps)
    ab = pde.apriori_bound(scenario.gamma, scenario.fnorm(grid), run.lam1, run.norm.times,
                           k=sc.parameters.get("k"), u0_norm=grid.norm(u0))
    res.bound = ab.curve
    slack = float(np.max(run.norm.values - ab.curve.values))
    sup = float(run.norm.values.max())
    bound_ok = slack <= 1e-3 and (ab.analytic_sup is None or sup <= ab.analytic_sup)
    res.checks["bound"] = "pass" if bound_ok else "fail"
    res.extra["pde"] = {"n": grid.n, "lam1": run.lam1, "residual": run.residual,
                        "energy_residual": run.energy_residual, "sup_norm": sup,
                        "final_norm": float(run.norm.values[-1]), "bound_sup": ab.sup,
                        "analytic_sup": ab.analytic_sup, "bound_note": ab.note, "max_excess_over_bound": slack,
                        "horizon": run.norm.t_end}
    n_pairs = int(cfg.get("probe_pairs", 0))
    if n_pairs:
        probe = pde.dissipativity_probe(scenario, grid, n_pairs=n_pairs, seed=sc.seed)
        res.checks["probe"] = "pass" if probe.passed else "fail"
        res.extra["probe"] = {"worst_margin": probe.worst_margin, "n_pairs": probe.n_pairs, "tol": probe.tol}
    if cfg.get("pair_check"):
        rng = np.random.default_rng(sc.seed)
        v0 = u0 + rng.uniform(-1.0, 1.0, grid.n)
        pair = pde.simulate_pair(scenario, v0, grid, sc.solver)
        res.checks["contractivity"] = "pass" if pair.diff_increase <= 1e-8 else "fail"
        res.extra["contractivity"] = {"max_step_increase": pair.diff_increase}


def _run_peano(sc, res):
    cfg = sc.peano
    rate = float(cfg.get("rate", 1.0))
    u0 = float(cfg.get("u0", 1.0))
    n_list = [int(n) for n in cfg.get("n_list", [1, 8, 16, 32, 64])]
    t_end = float(cfg.get("t_end", 1.0))
    dt = float(cfg.get("dt", 1e-4))
    its = odesolve.peano_iterates(lambda t, u: -rate * u, lambda t: 0.0, u0, n_list, t_end, dt)
    errors = {}
    for n, it in zip(n_list, its):
        errors[n] = float(np.max(np.abs(it.values - u0 * np.exp(-rate * it.times))))
    ratios = {f"{n}->{2 * n}": errors[2 * n] / errors[n] for n in n_list if 2 * n in errors and errors[n] > 0}
    first = None
    if 1 in errors:
        it1 = its[n_list.index(1)]
        on_unit = it1.times <= 1.0
        first = float(np.max(np.abs(it1.values[on_unit] - u0 * (1 - rate * it1.times[on_unit]))))
    ok = all(r <= 0.75 for r in ratios.values()) and (first is None or first <= 1e-3)
    res.checks["peano"] = "pass" if ok else "fail"
    res.extra["peano"] = {"errors": {str(n): e for n, e in errors.items()}, "ratios": ratios,
                          "n1_vs_linear": first, "horizon": t_end}
    res.trajectory = its[-1]


def _run_check(sc, res):
    _hypotheses(sc, res)


PIPELINES = {"surrogate": _run_surrogate, "pde": _run_pde, "peano": _run_peano, "check-only": _run_check}


def run_pipeline(sc) -> Results:
    """Run the scenario's pipeline; runtime failures are captured as a partial result."""
    res = Results(sc)
    try:
        PIPELINES[sc.kind](sc, res)
    except ConfigError:
        raise
    except (NldecayError, ArithmeticError, FloatingPointError) as exc:
        log.warning("scenario %s aborted: %s", sc.name, exc)
        res.partial = True
        res.error = f"{type(exc).__name__}: {exc}"
    return res


# ---------------------------------------------------------------------------
# expectations and exit code
# ---------------------------------------------------------------------------


def evaluate(res: Results):
    """Compare results with expectations; returns ``(rows, exit_code)``."""
    sc = res.scenario
    expect = dict(sc.expect)
    for tid in sc.theorems or ():
        expect.setdefault(tid, "pass")
    reports = dict(res.theorems)
    rows = []
    for key in sorted(expect):
        want = expect[key]
        if key == "floor_tol":
            continue
        if key == "verdict":
            got = res.verdict.status if res.verdict else "missing"
            rows.append({"key": key, "expected": want, "actual": got, "met": got == want})
        elif key == "floor":
            tol = float(expect.get("floor_tol", 1e-3))
            err = verdict.floor_error(res.verdict, float(want)) if res.verdict else math.inf
            got = res.verdict.limit if res.verdict else None
            rows.append({"key": key, "expected": want, "actual": got, "met": err <= tol, "tol": tol})
        elif key in reports:
            got = reports[key].status
            rows.append({"key": key, "expected": want, "actual": got, "met": got == want})
        else:
            got = res.checks.get(key, "missing")
            rows.append({"key": key, "expected": want, "actual": got, "met": got == want})
    if res.error or any(not r["met"] for r in rows):
        return rows, EXIT_VIOLATED
    statuses = [rep.status for _, rep in res.theorems] + list(res.checks.values())
    if res.verdict is not None:
        statuses.append("inconclusive" if res.verdict.status == "inconclusive" else "pass")
    unexpected_inconclusive = [s for s in statuses if s == "inconclusive"]
    expected_inconclusive = [r for r in rows if r["expected"] == "inconclusive"]
    if len(unexpected_inconclusive) > len(expected_inconclusive):
        return rows, EXIT_INCONCLUSIVE
    return rows, EXIT_OK


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def build_report(res: Results, rows, code, artifacts):
    sc = res.scenario
    report = {
        "scenario": sc.name,
        "kind": sc.kind,
        "catalog": sc.catalog,
        "config_hash": sc.config_hash,
        "seed": sc.seed,
        "theorem": [rep.to_dict() for _, rep in res.theorems],
        "verdict": res.verdict.to_dict() if res.verdict else None,
        "checks": dict(sorted(res.checks.items())),
        "details": {k: v for k, v in res.extra.items() if not isinstance(v, Trajectory)},
        "expectations": rows,
        "partial": res.partial,
        "error": res.error,
        "exit_code": code,
        "artifacts": sorted(artifacts),
    }
    if res.trajectory is not None:
        report["trajectory"] = {"horizon": res.trajectory.t_end, "complete": res.trajectory.complete,
                                "rows": len(res.trajectory), "clip_events": len(res.trajectory.events)}
    return _clean(report)


def emit_outputs(res: Results, out_dir, rows, code):
    """Write CSVs and ``report.json`` into ``out_dir``; returns the report dict."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        artifacts = []
        if res.trajectory is not None:
            cols = ["norm"] if res.scenario.kind == "pde" else ["value"]
            res.trajectory.to_csv(os.path.join(out_dir, "trajectory.csv"), columns=cols)
            artifacts.append("trajectory.csv")
        w = res.extra.get("w_trajectory")
        if w is not None:
            w.thinned(20001).to_csv(os.path.join(out_dir, "trajectory_s.csv"), columns=["w"])
            artifacts.append("trajectory_s.csv")
        if res.snapshots:
            os.makedirs(os.path.join(out_dir, "snapshots"), exist_ok=True)
            for i, t in enumerate(sorted(res.snapshots)):
                name = f"snapshots/snapshot_{i:03d}.csv"
                snap = Trajectory(res.snapshot_x, res.snapshots[t], {})
                with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
                    fh.write(snap.to_csv(columns=[f"u(t={t!r})"]).replace("t,", "x,", 1))
                artifacts.append(name)
        if res.bound is not None:
            res.bound.to_csv(os.path.join(out_dir, "bound.csv"), columns=["bound"])
            artifacts.append("bound.csv")
        report = build_report(res, rows, code, artifacts + ["report.json"])
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report, fh, sort_keys=True, indent=2, ensure_ascii=False)
            fh.write("\n")
    except OSError as exc:
        raise ConfigError(f"cannot write outputs: {exc.strerror}", field="output.dir") from None
    return report


def run_scenario(sc, out_dir=None):
    """Run ``sc`` end to end and return ``(exit_code, report)``."""
    res = run_pipeline(sc)
    rows, code = evaluate(res)
    target = out_dir or sc.out_dir or os.path.join("out", sc.name)
    report = emit_outputs(res, target, rows, code)
    return code, report
