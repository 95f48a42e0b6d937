"""1D semilinear heat equation  u' = gamma(t) [L u - h(u)] + f(t, x)  with Dirichlet ends.

The Laplacian is the (1, -2, 1)/h^2 stencil on n interior points of
(0, length).  Norms and inner products carry the weight h, so
``norm(u)**2 = h * sum(u**2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, ValidationError
from .funcspace import Constant, PowerLaw, UnivariateFn, integrate_cumulative, simpson_panels
from .odesolve import SolverConfig, Trajectory


@dataclass(frozen=True)
class Grid1D:
    n: int
    length: float = math.pi

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("grid needs at least 3 interior points")
        if not self.length > 0:
            raise ValidationError("domain length must be positive")

    @property
    def h(self):
        return self.length / (self.n + 1)

    @property
    def x(self):
        return self.h * np.arange(1, self.n + 1)

    def inner(self, u, v):
        return self.h * float(np.dot(u, v))

    def norm(self, u):
        return math.sqrt(self.h * float(np.dot(u, u)))


@dataclass(frozen=True)
class DiscreteOperator:
    """Dirichlet Laplacian stencil with its smallest eigenvalue ``lam1`` of ``-L``."""

    grid: Grid1D
    lam1: float

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        out = -2.0 * u
        out[..., 1:] += u[..., :-1]
        out[..., :-1] += u[..., 1:]
        return out / self.grid.h**2

    def matrix(self):
        n = self.grid.n
        return (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / self.grid.h**2

    def eigenvector(self, k=1):
        return np.sin(k * math.pi * self.grid.x / self.grid.length)


def assemble_operator(grid: Grid1D) -> DiscreteOperator:
    h = grid.h
    lam1 = (4.0 / h**2) * math.sin(math.pi * h / (2.0 * grid.length)) ** 2
    return DiscreteOperator(grid, lam1)


NONLINEARITIES = {"zero": 0, "cubic": 1, "power": 2}


@dataclass(frozen=True)
class PDEScenario:
    """Coefficients, forcing ``amplitude(t) * profile(x)``, nonlinearity and initial state.

    ``nonlinearity`` is ``"cubic"`` (u^3), ``"power"`` (u |u|^(p-1)) or
    ``"zero"``.  ``k`` is the decay exponent of the forcing, used for the
    closed-form sup bound.
    """

    gamma: UnivariateFn
    u0: np.ndarray
    amplitude: UnivariateFn = field(default_factory=lambda: Constant(0.0))
    profile: np.ndarray | None = None
    nonlinearity: str = "cubic"
    p: float = 3.0
    k: float | None = None

    def __post_init__(self):
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity {self.nonlinearity!r}", field="pde.nonlinearity")
        if self.nonlinearity == "power" and not self.p >= 1:
            raise ConfigError("power nonlinearity needs p >= 1", field="pde.p")
        states = np.linspace(-10.0, 10.0, 401)
        if np.any(states * self.h(states) < 0):
            raise ValidationError("nonlinearity violates u h(u) >= 0")
        u0 = np.asarray(self.u0, dtype=float)
        object.__setattr__(self, "u0", u0)
        prof = np.zeros_like(u0) if self.profile is None else np.asarray(self.profile, dtype=float)
        if prof.shape != u0.shape:
            raise ValidationError("forcing profile and u0 must live on the same grid")
        object.__setattr__(self, "profile", prof)
        if np.any(self.gamma(np.geomspace(1e-6, 1e6, 121)) <= 0) or float(self.gamma(0.0)) <= 0:
            raise ValidationError("gamma must be positive")

    def h(self, u):
        u = np.asarray(u, dtype=float)
        if self.nonlinearity == "cubic":
            return u**3
        if self.nonlinearity == "power":
            return u * np.abs(u) ** (self.p - 1.0)
        return np.zeros_like(u)

    def fnorm(self, grid: Grid1D) -> UnivariateFn:
        """``||f(t)||`` as amplitude times the discrete norm of the profile."""
        return self.amplitude * grid.norm(self.profile)

    def field(self, op: DiscreteOperator):
        """The right-hand side ``A(t, u) + f(t)`` as a callable."""

        def rhs(t, u):
            return float(self.gamma(t)) * (op.apply(u) - self.h(u)) + float(self.amplitude(t)) * self.profile

        return rhs


def profile_shape(name, grid: Grid1D, normalize=True):
    """Named spatial profiles: ``sin`` (first eigenvector), ``ones``, ``bump``."""
    x = grid.x
    if name == "sin":
        prof = np.sin(math.pi * x / grid.length)
    elif name == "ones":
        prof = np.ones_like(x)
    elif name == "bump":
        prof = np.exp(-((x - grid.length / 3) ** 2) / 0.1)
    elif name == "zero":
        return np.zeros_like(x)
    else:
        raise ConfigError(f"unknown profile {name!r}", field="pde.profile")
    return prof / grid.norm(prof) if normalize else prof


@dataclass
class PDERun:
    norm: Trajectory
    snapshots: dict
    final: np.ndarray
    residual: float
    energy_residual: float
    lam1: float
    complete: bool
    diff: Trajectory | None = None
    diff_increase: float = -math.inf

    def residual_ok(self, tol):
        return self.residual <= tol


def _drive(scenario, states, grid, config, snapshot_times=()):
    op = assemble_operator(grid)
    nsteps, within = config.steps()
    dt = config.dt
    mids = dt * (np.arange(nsteps) + 0.5)
    gamma_mid = np.asarray(scenario.gamma(mids), dtype=float)
    amp_mid = np.asarray(scenario.amplitude(mids), dtype=float)
    snap_times = np.asarray(sorted(snapshot_times), dtype=float)
    snap_steps = np.clip(np.round(snap_times / dt).astype(np.int64), 0, nsteps)
    out = kernels.imex_heat(
        np.ascontiguousarray(states, dtype=float), gamma_mid, amp_mid, scenario.profile.astype(float),
        grid.h, dt, NONLINEARITIES[scenario.nonlinearity], float(scenario.p), op.lam1,
        int(config.record_every), snap_steps,
    )
    norms, resid, energy, diff, diff_inc, snaps, final, ok = out
    rec_times = dt * config.record_every * np.arange(norms.shape[1])
    keep = rec_times <= dt * ok + 1e-12
    return op, rec_times[keep], norms[:, keep], resid, energy, diff[keep], diff_inc, snaps, snap_times, final, \
        ok == nsteps and within


def simulate(scenario: PDEScenario, grid: Grid1D, config: SolverConfig, snapshot_times=()) -> PDERun:
    """Semi-implicit Euler: ``gamma(t) L`` implicit, nonlinearity and forcing explicit.

    Coefficients are taken at step midpoints.  Besides the norm trajectory and
    snapshots, the run records the worst per-step residual of

        (|u_{k+1}| - |u_k|) / dt <= -gamma lam1 |u_{k+1}| + |f|

    which the scheme satisfies exactly up to rounding whenever the explicit
    nonlinear update does not expand the state.
    """
    if scenario.u0.shape != (grid.n,):
        raise ValidationError("u0 does not match the grid")
    op, times, norms, resid, energy, _, _, snaps, snap_times, final, complete = _drive(
        scenario, scenario.u0[None, :], grid, config, snapshot_times)
    meta = {"scheme": "semi-implicit-euler", "dt": config.dt, "n": grid.n, "lam1": op.lam1}
    norm_traj = Trajectory(times, norms[0], meta, complete)
    snapshots = {float(t): snaps[i, 0].copy() for i, t in enumerate(snap_times)}
    return PDERun(norm_traj, snapshots, final[0], float(resid[0]), float(energy[0]), op.lam1, complete)


def simulate_pair(scenario: PDEScenario, v0, grid: Grid1D, config: SolverConfig) -> PDERun:
    """Evolve ``scenario.u0`` and ``v0`` in lockstep and track ``|u - v|``."""
    states = np.stack([scenario.u0, np.asarray(v0, dtype=float)])
    op, times, norms, resid, energy, diff, diff_inc, _, _, final, complete = _drive(scenario, states, grid, config)
    meta = {"scheme": "semi-implicit-euler", "dt": config.dt, "n": grid.n, "lam1": op.lam1}
    return PDERun(Trajectory(times, norms[0], meta, complete), {}, final[0], float(resid.max()),
                  float(energy.max()), op.lam1, complete,
                  diff=Trajectory(times, diff, dict(meta, quantity="|u-v|"), complete),
                  diff_increase=float(diff_inc))


@dataclass(frozen=True)
class ProbeReport:
    worst_margin: float
    n_pairs: int
    tol: float

    @property
    def passed(self):
        return self.worst_margin <= self.tol


def dissipativity_probe(scenario: PDEScenario, grid: Grid1D, n_pairs=200, t_samples=(0.0, 1.0, 10.0, 100.0),
                        amplitude=2.0, seed=0, tol=1e-10, pairs=None) -> ProbeReport:
    """Worst value of ``<A(t,u) - A(t,v), u - v> + gamma(t) lam1 |u - v|^2`` over sampled states."""
    op = assemble_operator(grid)
    if pairs is None:
        rng = np.random.default_rng(seed)
        us = rng.uniform(-amplitude, amplitude, size=(n_pairs, grid.n))
        vs = rng.uniform(-amplitude, amplitude, size=(n_pairs, grid.n))
    else:
        us, vs = (np.atleast_2d(np.asarray(p, dtype=float)) for p in pairs)
    worst = -math.inf
    for t in t_samples:
        g = float(scenario.gamma(t))
        au = g * (op.apply(us) - scenario.h(us))
        av = g * (op.apply(vs) - scenario.h(vs))
        w = us - vs
        lhs = grid.h * np.sum((au - av) * w, axis=1)
        rhs = -g * op.lam1 * grid.h * np.sum(w * w, axis=1)
        worst = max(worst, float(np.max(lhs - rhs)))
    return ProbeReport(worst, len(us), tol)


@dataclass(frozen=True)
class AprioriBound:
    curve: Trajectory
    sup: float
    analytic_sup: float | None
    note: str = ""


def apriori_bound(gamma: UnivariateFn, fnorm: UnivariateFn, c, t_grid, k=None, tol=1e-11,
                  u0_norm=0.0) -> AprioriBound:
    """``B(t) = |u0| e^{-c G(0,t)} + int_0^t |f(s)| e^{-c G(s,t)} ds`` with ``G(s,t) = int_s^t gamma``.

    Evaluated on ``t_grid`` by nested quadrature; zero initial data gives the
    plain forcing integral.

    For power-law forcing ``|f| <= C (1 + t)^-k`` with ``k > 1`` the
    closed-form bound ``max(C, 1) / (k - 1)`` is also returned; for ``k <= 1``
    it is unavailable.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    t = np.asarray(t_grid, dtype=float)
    if t[0] != 0 or np.any(np.diff(t) <= 0):
        raise ValidationError("t_grid must start at 0 and increase strictly")
    cum = integrate_cumulative(gamma, t, tol)
    left = t[:-1]

    def gamma_from_left(x, owner):
        inner, _ = simpson_panels(gamma._values, left[owner], x, tol)
        return cum[owner] + inner

    def weighted(x, owner):
        decay = cum[owner + 1] - gamma_from_left(x, owner)
        return fnorm._values(x) * np.exp(-c * decay)

    pieces, _ = simpson_panels(weighted, left, t[1:], tol, indexed=True)
    bound = np.zeros_like(t)
    bound[0] = float(u0_norm)
    factor = np.exp(-c * np.diff(cum))
    for i, piece in enumerate(pieces):
        bound[i + 1] = bound[i] * factor[i] + piece
    analytic, note = None, ""
    if k is None and isinstance(fnorm, PowerLaw) and fnorm.shift == 1.0:
        k = fnorm.alpha
    if k is not None and u0_norm == 0:
        if k > 1:
            coef = fnorm.c if isinstance(fnorm, PowerLaw) else 1.0
            analytic = max(coef, 1.0) / (k - 1.0)
        else:
            note = "closed-form sup bound unavailable: needs k > 1"
    curve = Trajectory(t, bound, {"quantity": "apriori_bound", "c": c})
    return AprioriBound(curve, float(bound.max()), analytic, note)
