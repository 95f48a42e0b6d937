"""Scalar surrogate dynamics, the monotone clock change, and Peano iterates."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError, ValidationError
from .funcspace import UnivariateFn, integrate, simpson_panels


@dataclass(frozen=True)
class Trajectory:
    """Samples of a scalar or vector quantity on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    complete: bool = True
    events: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape[:1] != t.shape:
            raise ValidationError("trajectory values must have one row per time")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValidationError("trajectory values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def is_scalar(self):
        return self.values.ndim == 1

    def at(self, t):
        """Linear interpolation of a scalar trajectory."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise DomainError("query outside the trajectory time range")
        return np.interp(t, self.times, self.values)

    def thinned(self, max_rows):
        if len(self) <= max_rows:
            return self
        idx = np.unique(np.concatenate([np.linspace(0, len(self) - 1, max_rows).round().astype(int)]))
        return replace(self, times=self.times[idx], values=self.values[idx])

    def to_csv(self, path=None, columns=None, metadata=False):
        """A header line then one row per time.

        With ``metadata=True`` a ``# key: value`` block precedes the header;
        :meth:`from_csv` reads both forms.
        """
        buf = io.StringIO()
        if metadata:
            for key in sorted(self.metadata):
                buf.write(f"# {key}: {self.metadata[key]}\n")
            buf.write(f"# complete: {str(self.complete).lower()}\n")
        vals = self.values.reshape(len(self), -1)
        if columns is None:
            columns = ["value"] if vals.shape[1] == 1 else [f"value{i}" for i in range(vals.shape[1])]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", *columns])
        for t, row in zip(self.times, vals):
            writer.writerow([repr(float(t)), *(repr(float(x)) for x in row)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path):
        meta, rows = {}, []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].partition(":")
                    meta[key.strip()] = value.strip()
                elif line.strip():
                    rows.append(line.strip().split(","))
        data = np.array(rows[1:], dtype=float)
        complete = meta.pop("complete", "true") == "true"
        values = data[:, 1] if data.shape[1] == 2 else data[:, 1:]
        return cls(data[:, 0], values, meta, complete)


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = "rk4"  # rk4 | semi-implicit
    dt: float = 1e-2
    t_end: float = 10.0
    atol: float = 1e-8
    rtol: float = 1e-6
    max_steps: int = 10_000_000
    max_halvings: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.scheme not in ("rk4", "semi-implicit"):
            raise ConfigError(f"unknown scheme {self.scheme!r}", field="solver.scheme")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive", field="solver.t_end")
        if not self.dt > 0:
            raise ConfigError("dt must be positive", field="solver.dt")
        if not (self.atol > 0 and self.rtol > 0):
            raise ConfigError("tolerances must be positive", field="solver.atol")
        if self.max_steps < 1 or self.record_every < 1:
            raise ConfigError("max_steps and record_every must be >= 1", field="solver.max_steps")

    def steps(self, dt=None):
        dt = self.dt if dt is None else dt
        n = int(math.ceil(self.t_end / dt - 1e-9))
        return min(n, self.max_steps), n <= self.max_steps


def _nodes(fn, times, dt):
    """Coefficient values at t_k, t_k + dt/2, t_k + dt."""
    half = np.empty(2 * times.size - 1)
    half[0::2] = times
    half[1::2] = times[:-1] + 0.5 * dt
    return np.asarray(fn(half), dtype=float)


def _surrogate_once(a, f_prog, b, g0, config, dt):
    nsteps, within = config.steps(dt)
    times = dt * np.arange(nsteps + 1)
    values, clipped = kernels.surrogate_rk4(
        f_prog, _nodes(a, times, dt), _nodes(b, times, dt), float(g0), float(dt), nsteps,
        config.scheme == "semi-implicit",
    )
    return times[: values.size], values, clipped, within and values.size == nsteps + 1


def solve_surrogate(a: UnivariateFn, f: UnivariateFn, b: UnivariateFn, g0, config: SolverConfig) -> Trajectory:
    """Integrate the equality surrogate ``g' = -a(t) f(g) + b(t)`` with fixed steps.

    ``f`` is a function of the state and must be packable for the kernels.
    The state models a norm, so undershoots below zero are clipped and
    reported in ``events``.  With ``config.max_halvings > 0`` the step is
    halved until two successive endpoints agree to ``atol + rtol * |g|``.
    """
    if g0 < 0:
        raise ValidationError("g0 must be nonnegative")
    if float(f(0.0)) != 0.0:
        raise ValidationError("the nonlinearity must vanish at 0")
    prog = f.pack()
    dt = config.dt
    times, values, clipped, complete = _surrogate_once(a, prog, b, g0, config, dt)
    halvings = 0
    while halvings < config.max_halvings and complete:
        t2, v2, c2, ok2 = _surrogate_once(a, prog, b, g0, config, dt / 2)
        halvings += 1
        agree = abs(v2[-1] - values[-1]) <= config.atol + config.rtol * abs(v2[-1])
        dt /= 2
        times, values, clipped, complete = t2, v2, c2, ok2
        if agree:
            break
    events = tuple(("clip", float(t)) for t in times[clipped])
    meta = {"scheme": config.scheme, "dt": dt, "label": "surrogate", "halvings": halvings}
    traj = Trajectory(times, values, meta, complete, events)
    if config.record_every > 1:
        keep = np.unique(np.concatenate([np.arange(0, times.size, config.record_every), [times.size - 1]]))
        traj = replace(traj, times=times[keep], values=values[keep])
    return traj


@dataclass(frozen=True)
class MonotoneMap:
    """The clock ``s(t) = int_0^t a``, tabulated with an exact-quadrature refinement."""

    a: UnivariateFn
    times: np.ndarray
    s_values: np.ndarray
    tol: float = 1e-12

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def s_end(self):
        return float(self.s_values[-1])

    def forward(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < 0) or np.any(t > self.t_end * (1 + 1e-15)):
            raise DomainError("t outside the map range")
        t = np.minimum(t, self.t_end)
        i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        base = self.s_values[i]
        extra, _ = simpson_panels(self.a._values, self.times[i], t, self.tol)
        out = base + extra
        return float(out[0]) if scalar else out

    def inverse(self, s):
        """``t(s)`` by bisection on the bracketing tabulation cell, Newton-accelerated."""
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        if np.any(s < 0) or np.any(s > self.s_end * (1 + 1e-15)):
            raise DomainError("s outside the map range")
        s = np.minimum(s, self.s_end)
        i = np.clip(np.searchsorted(self.s_values, s, side="right") - 1, 0, self.times.size - 2)
        lo = self.times[i].copy()
        hi = self.times[i + 1].copy()
        ds = self.s_values[i + 1] - self.s_values[i]
        w = np.where(ds > 0, (s - self.s_values[i]) / np.where(ds > 0, ds, 1), 0)
        t = lo + w * (hi - lo)
        for _ in range(60):
            err = self.forward(t) - s
            lo = np.where(err <= 0, t, lo)
            hi = np.where(err > 0, t, hi)
            step = t - err / self.a(t)
            inside = (step > lo) & (step < hi)
            t_new = np.where(inside, step, 0.5 * (lo + hi))
            if np.all(np.abs(t_new - t) <= 1e-15 * np.maximum(1.0, t)):
                t = t_new
                break
            t = t_new
        return float(t[0]) if scalar else t


def reparameterize(a: UnivariateFn, t_end, tol=1e-12, n_grid=None) -> MonotoneMap:
    """Tabulate ``s(t) = int_0^t a`` on [0, t_end]; ``a`` must be positive there."""
    t_end = float(t_end)
    n = n_grid or int(min(max(64, 8 * t_end), 20001))
    grid = np.unique(np.concatenate([np.linspace(0, t_end, n), np.geomspace(min(1e-3, t_end), t_end, 64)]))
    grid = np.concatenate([[0.0], grid[grid > 0]])
    avals = np.asarray(a(grid), dtype=float)
    if np.any(avals <= 0):
        raise ValidationError("the clock rate a(t) must be positive on [0, t_end]")
    pieces, _ = simpson_panels(a._values, grid[:-1], grid[1:], tol)
    s = np.concatenate([[0.0], np.cumsum(pieces)])
    if np.any(np.diff(s) <= 0):
        raise ValidationError("s(t) is not strictly increasing")
    return MonotoneMap(a, grid, s, tol)


def transform_trajectory(traj: Trajectory, clock: MonotoneMap, n_s=None) -> Trajectory:
    """Resample ``traj`` on a uniform grid of the new clock: ``w(s) = g(t(s))``."""
    if traj.times[0] != 0 or traj.t_end > clock.t_end * (1 + 1e-12):
        raise DomainError("trajectory must start at 0 and lie within the map range")
    s_end = clock.forward(traj.t_end)
    n_s = n_s or min(len(traj), 20001)
    s = np.linspace(0.0, s_end, n_s)
    t_of_s = np.minimum(clock.inverse(s), traj.t_end)
    if traj.is_scalar:
        w = np.interp(t_of_s, traj.times, traj.values)
    else:
        w = np.stack([np.interp(t_of_s, traj.times, col) for col in traj.values.T], axis=1)
    meta = dict(traj.metadata, clock="s", map_horizon=clock.t_end, map_s_end=clock.s_end)
    return Trajectory(s, w, meta, traj.complete, traj.events)


def increment_check(w: Trajectory, clock: MonotoneMap, b: UnivariateFn, n_pairs=400, seed=0, tol=1e-6):
    """Largest ``w(s_j) - w(s_i) - int_{s_i}^{s_j} beta`` over sampled pairs s_i < s_j.

    Uses ``int beta ds = int_{t(s_i)}^{t(s_j)} b dt`` with ``beta = b / a``.
    Returns ``(worst_margin, passed)``.
    """
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.integers(0, len(w), size=(n_pairs, 2)), axis=1)
    idx = idx[idx[:, 0] < idx[:, 1]]
    ti = clock.inverse(w.times[idx[:, 0]])
    tj = clock.inverse(w.times[idx[:, 1]])
    budget = np.array([integrate(b, p, q, 1e-12) for p, q in zip(ti, tj)])
    margin = w.values[idx[:, 1]] - w.values[idx[:, 0]] - budget
    worst = float(margin.max()) if margin.size else -math.inf
    return worst, worst <= tol


def solve_system(field, u0, config: SolverConfig) -> Trajectory:
    """Fixed-step solution of ``u' = field(t, u)``.

    ``rk4`` is classical Runge-Kutta; ``semi-implicit`` is linearly implicit
    Euler with a finite-difference Jacobian.  A non-finite state stops the run
    and the partial trajectory is flagged incomplete.
    """
    u = np.atleast_1d(np.asarray(u0, dtype=float)).copy()
    nsteps, within = config.steps()
    dt = config.dt
    times = [0.0]
    states = [u.copy()]
    complete = within
    eye = np.eye(u.size)
    for k in range(nsteps):
        t = k * dt
        if config.scheme == "rk4":
            k1 = np.asarray(field(t, u), dtype=float)
            k2 = np.asarray(field(t + dt / 2, u + dt / 2 * k1), dtype=float)
            k3 = np.asarray(field(t + dt / 2, u + dt / 2 * k2), dtype=float)
            k4 = np.asarray(field(t + dt, u + dt * k3), dtype=float)
            un = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            f0 = np.asarray(field(t + dt, u), dtype=float)
            eps = 1e-7 * (1 + np.abs(u))
            jac = np.empty((u.size, u.size))
            for i in range(u.size):
                du = np.zeros_like(u)
                du[i] = eps[i]
                jac[:, i] = (np.asarray(field(t + dt, u + du), dtype=float) - f0) / eps[i]
            un = u + np.linalg.solve(eye - dt * jac, dt * f0)
        if not np.all(np.isfinite(un)):
            complete = False
            break
        u = un
        times.append((k + 1) * dt)
        states.append(u.copy())
    values = np.array(states)
    if values.shape[1] == 1:
        values = values[:, 0]
    return Trajectory(np.array(times), values, {"scheme": config.scheme, "dt": dt}, complete)


def peano_iterates(A, f, u0, n_list, t_end, dt) -> list:
    """Delayed-argument approximations ``u_n(t) = u0 + int_0^t [A(s, u_n(s - 1/n)) + f(s)] ds``.

    ``u_n = u0`` for arguments <= 0.  Each iterate is advanced on the fixed
    grid ``k * dt`` by the cumulative trapezoid rule; delayed states between
    grid points come from linear interpolation of the history.
    """
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    n_list = [int(n) for n in n_list]
    if any(n < 1 for n in n_list):
        raise ConfigError("delay indices must be >= 1")
    if dt > 1.0 / (2 * max(n_list)) + 1e-15:
        raise ConfigError(f"dt={dt} is too coarse for delay 1/{max(n_list)}; need dt <= 1/(2n)")
    nsteps = int(math.ceil(t_end / dt - 1e-9))
    times = dt * np.arange(nsteps + 1)
    out = []
    for n in n_list:
        delay = 1.0 / n
        hist = np.empty((nsteps + 1, u0.size))
        hist[0] = u0

        def delayed(s, upto):
            tau = s - delay
            if tau <= 0:
                return u0
            pos = tau / dt
            i = min(int(pos), upto - 1)
            w = pos - i
            return (1 - w) * hist[i] + w * hist[i + 1]

        def integrand(k):
            s = times[k]
            return np.asarray(A(s, delayed(s, k)), dtype=float) + np.asarray(f(s), dtype=float)

        g_prev = integrand(0)
        for k in range(nsteps):
            g_next = integrand(k + 1)
            hist[k + 1] = hist[k] + 0.5 * dt * (g_prev + g_next)
            g_prev = g_next
        values = hist[:, 0] if u0.size == 1 else hist
        out.append(Trajectory(times.copy(), values, {"scheme": "peano-trapezoid", "n": n, "dt": dt}))
    return out
