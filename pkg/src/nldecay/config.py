"""Scenario configuration files.

A scenario is one YAML document.  Key tree (all sections optional unless the
kind needs them)::

    name: my-run
    kind: surrogate | pde | peano | check-only | catalog
    catalog: thm-2-11-pass          # kind: catalog only
    seed: 0
    functions:                      # univariate descriptors, or a bivariate
      a: power_law(1, 0.5)          #   expression / separable mapping for f
      b: power_law(1, 2)
      g_rhs: monomial(1, 1)         # state nonlinearity of g' = -a f(g) + b
      f: "where(y <= 1, 1, 1 + (y - 1) * x)"
      phi, h, gamma, beta, omega: ...
    parameters: {state_bound, C, alpha, k, eps}
    theorems: [thm-2.11, ...]       # restrict the checks; each is expected to pass
    check: {horizon, s_min, deltas, n_pairs, tol, limit_tol, growth_tol,
            divergence_bound, profile_horizon}
    solver: {scheme, dt, t_end, record_every, max_halvings, g0, time_map}
    verdict: {eps}
    pde: {n, length, u0, u0_scale, profile, amplitude, nonlinearity, p,
          snapshots, probe_pairs, pair_check}
    peano: {rate, u0, n_list, t_end, dt}
    expect: {<theorem id>: pass|fail|inconclusive, verdict: decays|...,
             floor, floor_tol, bound: pass, probe: pass, peano: pass}
    output: {dir: out}
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, fields

import yaml

from .errors import ConfigError
from .funcspace import BivariateFn, parse_bivariate, parse_fn
from .hypothesis import CheckConfig, TheoremInputs
from .odesolve import SolverConfig

KINDS = ("surrogate", "pde", "peano", "check-only", "catalog")
SECTIONS = ("name", "kind", "catalog", "seed", "functions", "parameters", "theorems", "check", "solver",
            "verdict", "pde", "peano", "expect", "output")
UNIVARIATE = ("a", "b", "g_rhs", "phi", "h", "gamma", "beta", "omega")
REQUIRED = {
    "surrogate": ("functions.a", "functions.b", "functions.g_rhs"),
    "pde": ("functions.gamma",),
    "peano": (),
    "check-only": (),
    "catalog": ("catalog",),
}
STATUSES = ("pass", "fail", "inconclusive")
VERDICTS = ("decays", "no_decay", "inconclusive")


def _line_map(node, path=(), out=None):
    """Map dotted key paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            p = path + (str(key.value),)
            out[".".join(p)] = key.start_mark.line + 1
            _line_map(value, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, value in enumerate(node.value):
            p = path + (str(i),)
            out[".".join(p)] = value.start_mark.line + 1
            _line_map(value, p, out)
    return out


def _get(raw, dotted):
    cur = raw
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    kind: str
    raw: dict
    functions: dict = field(default_factory=dict)
    f: BivariateFn | None = None
    parameters: dict = field(default_factory=dict)
    theorems: tuple | None = None
    check: CheckConfig = field(default_factory=CheckConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    verdict_eps: float = 0.05
    pde: dict = field(default_factory=dict)
    peano: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)
    out_dir: str | None = None
    seed: int = 0
    catalog: str | None = None
    base_dir: str | None = None

    @property
    def inputs(self) -> TheoremInputs:
        p = self.parameters
        fn = self.functions
        return TheoremInputs(
            f=self.f, state_bound=p.get("state_bound"), phi=fn.get("phi"), C=p.get("C", 0.5),
            alpha=p.get("alpha"), h=fn.get("h"), a=fn.get("a"), b=fn.get("b"), g_rhs=fn.get("g_rhs"),
            gamma=fn.get("gamma"), beta=fn.get("beta"), eps=p.get("eps", 1e-3),
        )

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical config, ignoring the output location."""
        body = {k: v for k, v in self.raw.items() if k != "output"}
        text = json.dumps(body, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _section(raw, key, lines, kind=dict):
    value = raw.get(key)
    if value is None:
        return kind()
    if not isinstance(value, kind):
        raise ConfigError(f"section must be a {kind.__name__}", field=key, line=lines.get(key))
    return value


def _positive(value, dotted, lines):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", field=dotted, line=lines.get(dotted)) from None
    if not (x > 0 and math.isfinite(x)):
        raise ConfigError("must be a positive finite number", field=dotted, line=lines.get(dotted))
    return x


def _build_dataclass(cls, values, section, lines, converters):
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in values.items():
        dotted = f"{section}.{key}"
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", field=dotted, line=lines.get(dotted))
        conv = converters.get(key)
        kwargs[key] = conv(value, dotted, lines) if conv else value
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        dotted = exc.field or section
        raise ConfigError(str(exc).split(" (field")[0], field=dotted, line=lines.get(dotted)) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field=section, line=lines.get(section)) from None


def _int(value, dotted, lines):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"expected an integer, got {value!r}", field=dotted, line=lines.get(dotted))
    return int(value)


def _tuple_pos(value, dotted, lines):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("expected a non-empty list", field=dotted, line=lines.get(dotted))
    return tuple(_positive(v, f"{dotted}.{i}", lines) for i, v in enumerate(value))


_CHECK_CONV = {"horizon": _positive, "s_min": _positive, "tol": _positive, "limit_tol": _positive,
               "growth_tol": _positive, "divergence_bound": _positive, "profile_horizon": _positive,
               "n_pairs": _int, "deltas": _tuple_pos}
_SOLVER_CONV = {"dt": _positive, "t_end": _positive, "atol": _positive, "rtol": _positive,
                "max_steps": _int, "max_halvings": _int, "record_every": _int}


def parse_mapping(raw, lines=None, base_dir=None, overrides=None) -> ScenarioConfig:
    """Validate a loaded mapping and build a :class:`ScenarioConfig`."""
    lines = lines or {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at the top level", line=1)
    raw = copy.deepcopy(raw)
    _apply_overrides(raw, overrides or {})
    for key in raw:
        if key not in SECTIONS:
            raise ConfigError(f"unknown top-level key {key!r}", field=str(key), line=lines.get(str(key)))
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}", field="kind", line=lines.get("kind"))
    for dotted in REQUIRED[kind]:
        if _get(raw, dotted) is None:
            raise ConfigError(f"kind {kind} requires {dotted}", field=dotted,
                              line=lines.get(dotted.split(".")[0], lines.get("kind")))
    if kind == "catalog":
        from .catalog import catalog_case

        case = catalog_case(str(raw["catalog"]))
        merged = copy.deepcopy(case.scenario.raw)
        for key in ("expect", "output", "seed", "name"):
            if key in raw:
                merged[key] = raw[key]
        for key in ("check", "solver"):
            if key in raw:
                merged.setdefault(key, {}).update(raw[key])
        merged["catalog"] = case.id
        inner = parse_mapping(merged, lines, base_dir)
        return inner

    funcs_raw = _section(raw, "functions", lines)
    functions, bivariate = {}, None
    for key, desc in funcs_raw.items():
        dotted = f"functions.{key}"
        try:
            if key == "f":
                bivariate = parse_bivariate(desc, base_dir)
            elif key in UNIVARIATE:
                functions[key] = parse_fn(desc, base_dir)
            else:
                raise ConfigError(f"unknown function slot {key!r}")
        except (ConfigError, ValueError, OSError) as exc:
            msg = str(exc).split(" (field")[0]
            raise ConfigError(msg, field=dotted, line=lines.get(dotted)) from None

    params = dict(_section(raw, "parameters", lines))
    for key in ("state_bound", "C", "k", "eps", "kappa", "theta"):
        if key in params:
            params[key] = _positive(params[key], f"parameters.{key}", lines)
    if "alpha" in params:
        params["alpha"] = _positive(params["alpha"], "parameters.alpha", lines)

    theorems = raw.get("theorems")
    if theorems is not None:
        if not isinstance(theorems, list) or not all(isinstance(t, str) for t in theorems):
            raise ConfigError("theorems must be a list of ids", field="theorems", line=lines.get("theorems"))
        theorems = tuple(theorems)

    check = _build_dataclass(CheckConfig, _section(raw, "check", lines), "check", lines, _CHECK_CONV)
    solver_raw = dict(_section(raw, "solver", lines))
    solver_extra = {k: solver_raw.pop(k) for k in ("g0", "time_map") if k in solver_raw}
    if kind == "pde":
        solver_raw.setdefault("scheme", "semi-implicit")
    solver = _build_dataclass(SolverConfig, solver_raw, "solver", lines, _SOLVER_CONV)
    if "g0" in solver_extra:
        g0 = solver_extra["g0"]
        if not isinstance(g0, (int, float)) or isinstance(g0, bool) or g0 < 0:
            raise ConfigError("g0 must be a nonnegative number", field="solver.g0", line=lines.get("solver.g0"))

    verdict_raw = _section(raw, "verdict", lines)
    eps = _positive(verdict_raw.get("eps", 0.05), "verdict.eps", lines)

    expect = dict(_section(raw, "expect", lines))
    for key, value in expect.items():
        dotted = f"expect.{key}"
        if key == "verdict" and value not in VERDICTS:
            raise ConfigError(f"verdict expectation must be one of {VERDICTS}", field=dotted, line=lines.get(dotted))
        if key in ("floor", "floor_tol"):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError("expected a number", field=dotted, line=lines.get(dotted))
        elif key != "verdict" and value not in STATUSES:
            raise ConfigError(f"expectation must be one of {STATUSES}", field=dotted, line=lines.get(dotted))

    pde = dict(_section(raw, "pde", lines))
    if kind == "pde":
        for key in ("n",):
            if key in pde:
                pde[key] = _int(pde[key], f"pde.{key}", lines)
    peano = dict(_section(raw, "peano", lines))

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer", field="seed", line=lines.get("seed"))
    out_dir = _section(raw, "output", lines).get("dir")
    if kind == "check-only" and not functions and bivariate is None:
        raise ConfigError("check-only needs at least one function", field="functions", line=lines.get("kind"))

    return ScenarioConfig(
        name=str(raw.get("name", "scenario")), kind=kind, raw=raw, functions=functions, f=bivariate,
        parameters=dict(params, **solver_extra), theorems=theorems, check=check, solver=solver,
        verdict_eps=eps, pde=pde, peano=peano, expect=expect, out_dir=out_dir, seed=seed,
        catalog=raw.get("catalog"), base_dir=base_dir,
    )


def _apply_overrides(raw, overrides):
    """Command-line flags: only horizons, tolerances, seed and output directory."""
    if overrides.get("t_end") is not None:
        raw.setdefault("solver", {})["t_end"] = float(overrides["t_end"])
        if raw.get("kind") == "peano":
            raw.setdefault("peano", {})["t_end"] = float(overrides["t_end"])
    if overrides.get("tol") is not None:
        raw.setdefault("check", {})["tol"] = float(overrides["tol"])
    if overrides.get("seed") is not None:
        raw["seed"] = int(overrides["seed"])
    if overrides.get("out_dir") is not None:
        raw.setdefault("output", {})["dir"] = str(overrides["out_dir"])


def load_config(path, overrides=None) -> ScenarioConfig:
    """Read and validate a scenario file; errors carry the offending field and line."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", field=str(path)) from None
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None) from None
    lines = _line_map(node) if node is not None else {}
    return parse_mapping(raw, lines, os.path.dirname(os.path.abspath(path)), overrides)
