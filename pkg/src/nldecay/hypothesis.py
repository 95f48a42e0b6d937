"""Finite-horizon checks of the decay theorems' hypotheses.

Every "as t -> infinity" condition is turned into a trend test over
doubling windows, and every record states the horizon it looked at.
Verdicts are ``pass``, ``fail`` or ``inconclusive``; the last one is a
real answer, not an error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .funcspace import (
    BivariateFn,
    Tabulated,
    UnivariateFn,
    inf_tail,
    integrate_cumulative,
    monomial,
    monotone_check,
    power_law,
    sup_slice,
    tail_verdict,
)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
_RANK = {PASS: 0, INCONCLUSIVE: 1, FAIL: 2}


@dataclass(frozen=True)
class CheckConfig:
    """Knobs shared by all checkers.

    Attributes:
        horizon: Largest time any windowed test looks at.
        s_min: Where "sufficiently large s" starts.
        deltas: Shifts probed by the uniform-continuity certificate.
        n_pairs: Samples per axis for (s, t - s) pair grids.
        tol: Absolute tolerance for stabilisation and tail tests.
        limit_tol: Threshold a ratio must drop below to count as tending to 0.
        growth_tol: Relative growth between windows still counted as stable.
        divergence_bound: Partial integral above which growth means divergence.
        profile_horizon: Horizon for the closed-form regularity profile, which
            is cheap to sample far out.
    """

    horizon: float = 1e4
    s_min: float = 10.0
    deltas: tuple = (0.1, 1.0)
    n_pairs: int = 16
    tol: float = 1e-6
    limit_tol: float = 1e-3
    growth_tol: float = 0.05
    divergence_bound: float = 20.0
    profile_horizon: float = 1e8

    def __post_init__(self):
        if not self.horizon > self.s_min > 0:
            raise ConfigError("need horizon > s_min > 0", field="check.horizon")
        if min(self.tol, self.limit_tol, self.growth_tol, self.divergence_bound) <= 0:
            raise ConfigError("tolerances must be positive", field="check.tol")
        if self.n_pairs < 2:
            raise ConfigError("n_pairs must be at least 2", field="check.n_pairs")
        if not self.deltas or min(self.deltas) <= 0:
            raise ConfigError("deltas must be positive", field="check.deltas")


@dataclass(frozen=True)
class ConditionRecord:
    name: str
    status: str
    witness: dict
    horizon: float

    def __post_init__(self):
        if self.status not in _RANK:
            raise ValueError(f"bad status {self.status!r}")
        if not self.witness:
            raise ValueError("a condition record needs at least one numeric witness")

    def to_dict(self):
        return {"condition": self.name, "status": self.status, "witness": self.witness, "horizon": self.horizon}


@dataclass(frozen=True)
class HypothesisReport:
    theorem: str
    records: tuple = field(default=())

    @property
    def status(self):
        """``pass`` only if every record passes; any ``fail`` wins over ``inconclusive``."""
        if not self.records:
            return INCONCLUSIVE
        return max((r.status for r in self.records), key=_RANK.__getitem__)

    @property
    def horizon(self):
        return max((r.horizon for r in self.records), default=0.0)

    def record(self, name):
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def merged(self, theorem, *others):
        recs = list(self.records)
        for o in others:
            recs.extend(o.records)
        return HypothesisReport(theorem, tuple(recs))

    def to_dict(self):
        return {"theorem": self.theorem, "status": self.status, "horizon": self.horizon,
                "conditions": [r.to_dict() for r in self.records]}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


# ---------------------------------------------------------------------------
# majorant F(t, v) and its uniform continuity
# ---------------------------------------------------------------------------


class _SliceFn(UnivariateFn):
    """``x -> max_{0 <= zeta <= v} f(x, zeta)`` as a univariate function."""

    def __init__(self, f: BivariateFn, v: float):
        self.f = f
        self.v = float(v)

    def _values(self, t):
        return sup_slice(self.f, np.atleast_1d(t), self.v).reshape(np.shape(t))

    def describe(self):
        return f"sup_slice({self.f.describe()}, {self.v!r})"


def build_F(f: BivariateFn, v, t_grid, tol=1e-10) -> Tabulated:
    """Tabulate ``F(t, v) = int_0^t max_{0 <= zeta <= v} f(x, zeta) dx`` on ``t_grid``."""
    if v < 0:
        raise DomainError("state bound v must be nonnegative")
    grid = np.asarray(t_grid, dtype=float)
    if grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise ConfigError("t_grid must start at 0 and increase strictly", field="t_grid")
    values = integrate_cumulative(_SliceFn(f, v), grid, tol)
    # rounding can make a flat F dip by an ulp; F is non-decreasing by construction
    values = np.maximum.accumulate(values)
    return Tabulated.from_arrays(grid, values, source=f"F(t, {v!r})")


def _subhorizons(T, lo, count=4):
    hs = [T / 2.0**j for j in range(count - 1, -1, -1)]
    return [h for h in hs if h > lo]


def uc_certificate(F: UnivariateFn, config: CheckConfig, samples=4097) -> HypothesisReport:
    """Finite-horizon uniform-continuity certificate for ``F``.

    For each shift ``delta`` the modulus ``m(delta, T) = max_{t <= T - delta}
    F(t + delta) - F(t)`` is measured on the subhorizons T/8, T/4, T/2, T.
    The record passes when the last two doublings leave the modulus
    unchanged (within ``tol``) and fails when it keeps rising without the
    increments shrinking.
    """
    T = float(config.horizon)
    if F.horizon < T:
        raise ConfigError(f"F is tabulated only up to {F.horizon}, horizon is {T}", field="check.horizon")
    records = []
    for delta in config.deltas:
        if delta >= T:
            raise ConfigError(f"delta {delta} must be smaller than the horizon", field="check.deltas")
        table = []
        for sub in _subhorizons(T, 2 * delta):
            t = np.linspace(F.start, sub - delta, samples)
            inc = np.asarray(F(t + delta)) - np.asarray(F(t))
            table.append((sub, float(inc.max())))
        ms = np.array([m for _, m in table])
        steps = np.diff(ms)
        scale = config.tol * max(1.0, abs(ms[-1]))
        if len(steps) >= 2 and np.all(np.abs(steps[-2:]) <= scale):
            status = PASS
        elif len(steps) >= 2 and np.all(steps > scale) and steps[-1] >= 0.5 * steps[-2]:
            status = FAIL
        else:
            status = INCONCLUSIVE
        slope = float(np.polyfit([h for h, _ in table], ms, 1)[0]) if len(table) >= 2 else 0.0
        witness = {"delta": delta, "modulus": ms[-1], "slope": slope,
                   "table": [[h, m] for h, m in table]}
        records.append(ConditionRecord(f"uniform continuity of F (delta={delta!r})", status, witness, T))
    return HypothesisReport("uniform-continuity", tuple(records))


# ---------------------------------------------------------------------------
# regularity of phi: t - C/phi(t) -> inf and the window ratio M
# ---------------------------------------------------------------------------


def _window_ids(t, base):
    """Index j of the window (base 2^j, base 2^(j+1)]; ``t = base`` joins window 0."""
    return np.maximum(np.ceil(np.log2(t / base) - 1e-12) - 1, 0).astype(int)


def regularity_profile(phi: UnivariateFn, C, config: CheckConfig, per_window=64, inner=33) -> HypothesisReport:
    """Check ``lim (t - C/phi(t)) = inf`` and estimate ``M`` for ``phi``.

    ``rho(t) = t - C/phi(t)`` is sampled on doubling windows [2^j, 2^(j+1)]
    up to ``config.profile_horizon``.  The limit passes when each of the last
    three windows sets a new maximum and rho rises across the final window;
    it fails when the final window sits below an earlier maximum and rho
    falls across it.

    ``M_hat`` is the largest sampled ``max phi / min phi`` over
    ``[t - C/phi(t), t]``; samples whose interval starts below 0 are skipped.
    """
    if not C > 0:
        raise ConfigError("C must be positive", field="parameters.C")
    H = float(min(config.profile_horizon, phi.horizon))
    n_win = max(int(math.floor(math.log2(H))), 1)
    t = np.unique(np.concatenate([np.geomspace(2.0**j, 2.0 ** (j + 1), per_window) for j in range(n_win)]))
    t = t[t <= H]
    ph = np.asarray(phi(t), dtype=float)
    if np.any(ph < 0):
        raise DomainError("phi must be positive on the sampled grid")
    with np.errstate(divide="ignore"):
        rho = t - C / ph  # phi underflowing to 0 reads as rho = -inf
    wid = _window_ids(t, 1.0)
    wmax = np.array([rho[wid == j].max() for j in range(wid.max() + 1)])
    last = wid == wid.max()
    rising = rho[last][-1] > rho[last][0]
    records_prior = np.maximum.accumulate(wmax)
    new_record = [wmax[j] > records_prior[j - 1] for j in range(1, len(wmax))]
    if len(new_record) >= 3 and all(new_record[-3:]) and rising:
        limit_status = PASS
    elif len(wmax) >= 2 and wmax[-1] < records_prior[-2] and not rising:
        limit_status = FAIL
    else:
        limit_status = INCONCLUSIVE
    limit = ConditionRecord("lim t - C/phi(t) = inf", limit_status,
                            {"C": C, "rho_end": _num(rho[-1]), "rho_max": _num(rho.max()),
                             "argmax": float(t[int(np.argmax(rho))])}, float(t[-1]))

    lo = rho
    ok = lo >= 0
    skipped = int((~ok).sum())
    if skipped:
        warnings.warn(f"regularity_profile: {skipped} samples with t - C/phi(t) < 0 skipped", stacklevel=2)
    if ok.any():
        frac = np.linspace(0.0, 1.0, inner)
        pts = lo[ok, None] + (t[ok] - lo[ok])[:, None] * frac[None, :]
        vals = np.asarray(phi(pts), dtype=float)
        ratio = vals.max(axis=1) / vals.min(axis=1)
        rw = wid[ok]
        rmax = np.array([ratio[rw == j].max() for j in np.unique(rw)])
        m_hat = float(ratio.max())
        if len(rmax) >= 2 and rmax[-1] <= (1 + config.growth_tol) * rmax[-2]:
            m_status = PASS
        elif len(rmax) >= 3 and rmax[-1] > (1 + config.growth_tol) * rmax[-2] > (1 + config.growth_tol) ** 2 * rmax[-3]:
            m_status = FAIL
        else:
            m_status = INCONCLUSIVE
        m_witness = {"M_hat": m_hat, "M_last_window": float(rmax[-1]), "skipped": skipped}
    else:
        m_status = INCONCLUSIVE
        m_witness = {"M_hat": "nan", "skipped": skipped}
    m_rec = ConditionRecord("M = limsup max phi / min phi finite", m_status, m_witness, float(t[-1]))
    return HypothesisReport("regularity", (limit, m_rec))


# ---------------------------------------------------------------------------
# growth bounds on int_s^t sup f
# ---------------------------------------------------------------------------

GROWTH_MODES = ("integral_theta", "pointwise", "power_law")


def _trend(per_s, growth_tol):
    """Compare the earlier and later halves of a sequence of window maxima."""
    n = len(per_s)
    early = float(np.max(per_s[: n // 2]))
    late = float(np.max(per_s[n // 2:]))
    if not math.isfinite(late):
        return FAIL
    if late <= early * (1 + growth_tol) or late == 0.0:
        return PASS
    if per_s[-1] >= per_s[-2] >= per_s[-3]:
        return FAIL
    return INCONCLUSIVE


def growth_bound_check(f: BivariateFn, a, phi: UnivariateFn | None, mode, config: CheckConfig,
                       alpha=None) -> HypothesisReport:
    """Fit the constant in one of three growth bounds and test it for stability.

    Modes:
        integral_theta: ``int_s^t sup f <= theta a (t - s) max_[s,t] phi``.
        pointwise: ``sup_{zeta <= a} f(t, zeta) <= C~ phi(t)``.
        power_law: ``int_s^t sup f <= kappa a (t - s) / s^alpha``.

    Pairs use log-spaced ``s`` in [s_min, T/2] and log-spaced widths. The
    bound passes when the per-``s`` maximum ratio does not grow from the
    first half of the ``s`` range to the second.
    """
    if mode not in GROWTH_MODES:
        raise ConfigError(f"unknown growth mode {mode!r}", field="mode")
    if not a > 0:
        raise ConfigError("state bound a must be positive", field="parameters.state_bound")
    if mode == "power_law" and (alpha is None or not alpha > 0):
        raise ConfigError("power_law mode needs alpha > 0", field="parameters.alpha")
    if mode != "power_law" and phi is None:
        raise ConfigError(f"mode {mode} needs phi", field="functions.phi")
    T = float(config.horizon)
    n = int(config.n_pairs)
    s = np.geomspace(config.s_min, T / 2.0, n)
    slice_fn = _SliceFn(f, a)
    if mode == "pointwise":
        ts = np.geomspace(config.s_min, T, n * n)
        ratio = _safe_ratio(slice_fn._values(ts), np.asarray(phi(ts), dtype=float))
        per_s = np.array([chunk.max() for chunk in np.array_split(ratio, n)])
        key = "C_tilde_hat"
    else:
        widths = np.array([np.geomspace(0.1, T - si, n) for si in s])
        ends = s[:, None] + widths
        nodes = np.unique(np.concatenate([[0.0], s, ends.ravel()]))
        cum = integrate_cumulative(slice_fn, nodes, config.tol * 1e-3)
        F = lambda x: np.interp(x, nodes, cum)  # exact at nodes
        lhs = F(ends) - F(s)[:, None]
        if mode == "integral_theta":
            frac = np.linspace(0.0, 1.0, 33)
            pts = s[:, None, None] + widths[:, :, None] * frac[None, None, :]
            rhs = widths * a * np.asarray(phi(pts), dtype=float).max(axis=2)
            key = "theta_hat"
        else:
            rhs = a * widths / s[:, None] ** alpha
            key = "kappa_hat"
        ratio = _safe_ratio(lhs, rhs)
        per_s = ratio.max(axis=1)
    status = _trend(per_s, config.growth_tol)
    witness = {key: _num(np.max(per_s)), "early": _num(np.max(per_s[: n // 2])),
               "late": _num(np.max(per_s[n // 2:])), "mode": mode}
    return HypothesisReport("growth-bound", (ConditionRecord(f"growth bound ({mode})", status, witness, T),))


def _safe_ratio(num, den):
    num = np.maximum(np.asarray(num, dtype=float), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(num == 0, 0.0, num / den)
    return np.where(np.isnan(out), np.inf, out)


# ---------------------------------------------------------------------------
# limsup ratios and the forcing-vs-dissipation assumptions
# ---------------------------------------------------------------------------


def _window_maxima(h, phi, config, per_window=65):
    T = float(config.horizon)
    edges = [config.s_min]
    while edges[-1] * 2 <= T:
        edges.append(edges[-1] * 2)
    maxima = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        t = np.linspace(lo, hi, per_window)
        # a denominator that underflows to 0 gives 0/0 -> 0 and x/0 -> inf
        maxima.append(float(np.max(_safe_ratio(h(t), phi(t)))))
    return np.array(maxima), edges[-1]


def ratio_limsup(h: UnivariateFn, phi: UnivariateFn, config: CheckConfig, name=None) -> ConditionRecord:
    """``A_hat``: the last doubling-window maximum of ``h / phi``.

    Passes when that maximum does not exceed the previous window's by more
    than ``growth_tol``; fails when the last three windows keep growing.
    """
    maxima, reached = _window_maxima(h, phi, config)
    g = 1 + config.growth_tol
    if len(maxima) >= 2 and maxima[-1] <= g * maxima[-2]:
        status = PASS
    elif len(maxima) >= 3 and maxima[-1] > g * maxima[-2] and maxima[-2] > g * maxima[-3]:
        status = FAIL
    else:
        status = INCONCLUSIVE
    witness = {"A_hat": float(maxima[-1]), "window_maxima": [float(m) for m in maxima[-4:]]}
    label = name or f"limsup {h.describe()} / {phi.describe()} finite"
    return ConditionRecord(label, status, witness, reached)


def _tail_record(name, fn, config, want):
    tv = tail_verdict(fn, tol=config.tol, divergence_bound=config.divergence_bound)
    if tv.status == want:
        status = PASS
    elif tv.status == "inconclusive":
        status = INCONCLUSIVE
    else:
        status = FAIL
    witness = {"verdict": tv.status, "estimate": _num(tv.estimate), "partial": _num(tv.partial)}
    return ConditionRecord(name, status, witness, tv.horizon)


def _limit_zero_record(name, num, den, config):
    maxima, reached = _window_maxima(num, den, config)
    last = float(maxima[-1])
    falling = len(maxima) >= 2 and maxima[-1] <= maxima[-2] * (1 + config.growth_tol)
    if last <= config.limit_tol and falling:
        status = PASS
    elif len(maxima) >= 3 and last > config.limit_tol and maxima[-1] >= maxima[-2] * (1 - config.growth_tol) \
            and maxima[-2] >= maxima[-3] * (1 - config.growth_tol):
        status = FAIL
    else:
        status = INCONCLUSIVE
    return ConditionRecord(name, status, {"last_window_max": last, "limit_tol": config.limit_tol}, reached)


def assumption_check(gamma: UnivariateFn, beta: UnivariateFn, which, alpha=None,
                     config: CheckConfig | None = None) -> HypothesisReport:
    """Assumption A, B or C for ``|u'| <= -gamma omega(|u|) + beta``.

    A: int gamma = inf and beta/gamma -> 0.
    B: int gamma = inf and int beta/gamma < inf.
    C: int beta < inf, gamma = O((1+t)^-alpha) and limsup beta t^alpha < inf,
    with alpha in (0, 1].
    """
    config = config or CheckConfig()
    which = str(which).upper()
    if which == "A":
        recs = (_tail_record("int gamma = inf", gamma, config, "diverged"),
                _limit_zero_record("beta/gamma -> 0", beta, gamma, config))
    elif which == "B":
        recs = (_tail_record("int gamma = inf", gamma, config, "diverged"),
                _tail_record("int beta/gamma < inf", beta / gamma, config, "converged"))
    elif which == "C":
        if alpha is None or not 0 < alpha <= 1:
            raise ConfigError("Assumption C needs alpha in (0, 1]", field="parameters.alpha")
        recs = (_tail_record("int beta < inf", beta, config, "converged"),
                ratio_limsup(gamma, power_law(1.0, alpha), config, name="gamma = O((1+t)^-alpha)"),
                ratio_limsup(beta, monomial(1.0, -alpha), config, name="limsup beta t^alpha finite"))
    else:
        raise ConfigError(f"unknown assumption {which!r}", field="theorems")
    return HypothesisReport(f"thm-3.3/{which}", recs)


# ---------------------------------------------------------------------------
# theorem-level aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoremInputs:
    """Whatever a scenario provides; checks needing a missing piece are skipped.

    ``f`` is the bivariate right-hand side of ``y(t) - y(s) <= int f``;
    ``g_rhs`` is the state nonlinearity of ``g' <= -a f(g) + b``.
    """

    f: BivariateFn | None = None
    state_bound: float | None = None
    phi: UnivariateFn | None = None
    C: float = 0.5
    alpha: float | None = None
    h: UnivariateFn | None = None
    a: UnivariateFn | None = None
    b: UnivariateFn | None = None
    g_rhs: UnivariateFn | None = None
    gamma: UnivariateFn | None = None
    beta: UnivariateFn | None = None
    eps: float = 1e-3


def _alpha_record(alpha):
    ok = 0 < alpha <= 1
    return ConditionRecord("alpha in (0, 1]", PASS if ok else FAIL, {"alpha": alpha}, 0.0)


def _positivity_record(g_rhs: UnivariateFn, eps, config):
    """``f(0) = 0``, ``f > 0`` away from 0 and ``inf_{x >= eps} f > 0``."""
    est = inf_tail(g_rhs, eps, config.horizon)
    zero = float(g_rhs(0.0))
    status = PASS if zero == 0.0 and est.value > 0 else FAIL
    return ConditionRecord("m(eps) = inf_{x>=eps} f(x) > 0", status,
                           {"m_eps": est.value, "eps": eps, "f0": zero}, est.horizon)


def _monotone_record(g_rhs: UnivariateFn, config):
    ok = monotone_check(g_rhs, (0.0, config.horizon), 4001)
    return ConditionRecord("f non-decreasing", PASS if ok else FAIL, {"monotone": int(ok)}, config.horizon)


def applicable_theorems(scenario, config: CheckConfig | None = None, targets=None) -> list:
    """Run every theorem check the scenario has inputs for.

    ``scenario`` is a :class:`TheoremInputs` or anything with an ``inputs``
    attribute holding one.  Returns ``(theorem id, report)`` pairs sorted by
    status (pass, inconclusive, fail) and then id.  ``targets`` restricts the
    run to the listed ids.
    """
    config = config or CheckConfig()
    inp = getattr(scenario, "inputs", scenario)
    out = {}

    def want(tid):
        return targets is None or tid in targets

    if inp.f is not None and inp.state_bound is not None:
        v = inp.state_bound
        if want("thm-2.1"):
            grid = np.linspace(0.0, config.horizon, 4001)
            F = build_F(inp.f, v, grid)
            out["thm-2.1"] = uc_certificate(F, config).merged("thm-2.1")
        if inp.phi is not None and want("thm-2.4"):
            out["thm-2.4"] = regularity_profile(inp.phi, inp.C, config).merged(
                "thm-2.4", growth_bound_check(inp.f, v, inp.phi, "integral_theta", config))
        if inp.alpha is not None and want("thm-2.7"):
            grow = growth_bound_check(inp.f, v, None, "power_law", config, alpha=inp.alpha)
            out["thm-2.7"] = HypothesisReport("thm-2.7", (_alpha_record(inp.alpha),) + grow.records)
    if inp.h is not None:
        if inp.phi is not None and want("cor-2.9"):
            reg = regularity_profile(inp.phi, inp.C, config)
            out["cor-2.9"] = HypothesisReport("cor-2.9", reg.records + (
                ratio_limsup(inp.h, inp.phi, config, name="A = limsup h/phi finite"),))
        if inp.alpha is not None and want("cor-2.10"):
            out["cor-2.10"] = HypothesisReport("cor-2.10", (
                _alpha_record(inp.alpha),
                ratio_limsup(inp.h, monomial(1.0, -inp.alpha), config, name="A = limsup h t^alpha finite")))
    if inp.a is not None and inp.b is not None:
        a, b = inp.a, inp.b
        pos = (_positivity_record(inp.g_rhs, inp.eps, config),) if inp.g_rhs is not None else ()
        mono = (_monotone_record(inp.g_rhs, config),) if inp.g_rhs is not None else ()
        if want("thm-2.11"):
            out["thm-2.11"] = HypothesisReport("thm-2.11", pos + (
                _tail_record("int a = inf", a, config, "diverged"),
                _limit_zero_record("b/a -> 0", b, a, config)))
        if want("thm-2.13"):
            # int beta ds over the clock s = int a equals int b dt
            out["thm-2.13"] = HypothesisReport("thm-2.13", mono + (
                _tail_record("int a = inf", a, config, "diverged"),
                _tail_record("int beta ds = int b dt < inf", b, config, "converged")))
        if want("thm-2.14"):
            reg = regularity_profile(a, inp.C, config)
            out["thm-2.14"] = HypothesisReport("thm-2.14", mono + reg.records + (
                ratio_limsup(b, a, config, name="K = limsup b/a finite"),
                _tail_record("int b < inf", b, config, "converged")))
    if inp.gamma is not None and inp.beta is not None:
        for which in "ABC":
            tid = f"thm-3.3/{which}"
            if not want(tid) or (which == "C" and inp.alpha is None):
                continue
            out[tid] = assumption_check(inp.gamma, inp.beta, which, inp.alpha, config)
    return sorted(out.items(), key=lambda kv: (_RANK[kv[1].status], kv[0]))
