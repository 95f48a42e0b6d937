"""Decay verdicts on trajectories and integral certificates along them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .funcspace import OmegaFn, TailVerdict, Tabulated, UnivariateFn, WindowPolicy, tail_verdict
from .odesolve import Trajectory

DECAYS, NO_DECAY, INCONCLUSIVE = "decays", "no_decay", "inconclusive"


@dataclass(frozen=True)
class DecayVerdict:
    """Outcome of :func:`decay_verdict`.

    ``rate`` is the least-squares slope of ``-log y`` against ``log t`` over
    the final decade; it is a diagnostic and never decides the status.
    """

    status: str
    last_sup: float
    eps: float
    horizon: float
    rate: float | None = None
    limit: float | None = None
    window_infima: tuple = ()

    def to_dict(self):
        return {"status": self.status, "last_window_sup": self.last_sup, "eps": self.eps,
                "horizon": self.horizon, "rate_estimate": self.rate, "limit": self.limit,
                "window_infima": list(self.window_infima)}


def _fit_rate(t, y):
    keep = (t >= t[-1] / 10.0) & (t > 0) & (y > 10 * np.finfo(float).eps)
    if keep.sum() < 3 or t[keep][-1] <= t[keep][0]:
        return None
    slope = np.polyfit(np.log(t[keep]), np.log(y[keep]), 1)[0]
    return float(-slope)


def decay_verdict(traj: Trajectory, eps, window_policy: WindowPolicy | None = None,
                  floor_rtol=0.05, n_windows=3) -> DecayVerdict:
    """Classify a nonnegative scalar trajectory as decaying or not.

    Windows are the doubling windows ending at the last time: [T/2, T],
    [T/4, T/2], ... measured from the first sample.  ``decays`` when the
    supremum over the last window is at most ``eps``.  ``no_decay`` when the
    infima of the last ``n_windows`` windows all exceed ``eps`` and agree to
    ``floor_rtol``; the last infimum is reported as the limit.
    """
    pol = window_policy or WindowPolicy()
    if not traj.is_scalar:
        raise ConfigError("decay_verdict needs a scalar trajectory", field="trajectory")
    if not eps > 0:
        raise ConfigError("eps must be positive", field="verdict.eps")
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.values, dtype=float)
    if np.any(y < 0):
        raise ConfigError("decay_verdict needs a nonnegative trajectory", field="trajectory")
    t0, T = float(t[0]), float(t[-1])
    span = T - t0
    if span < 2 * pol.first:
        raise ConfigError(f"trajectory spans {span}, shorter than one window of {pol.first}",
                          field="verdict.window")
    infima, sups = [], []
    for k in range(n_windows):
        sel = (t >= t0 + span / 2.0 ** (k + 1)) & (t <= t0 + span / 2.0**k)
        if not sel.any():
            break
        infima.append(float(y[sel].min()))
        sups.append(float(y[sel].max()))
    infima = infima[::-1]
    last_sup = sups[0]
    rate = _fit_rate(t, y)
    if last_sup <= eps:
        return DecayVerdict(DECAYS, last_sup, float(eps), T, rate, None, tuple(infima))
    stable = len(infima) >= n_windows and min(infima) > eps and \
        all(abs(b - a) <= floor_rtol * a for a, b in zip(infima[:-1], infima[1:]))
    if stable:
        return DecayVerdict(NO_DECAY, last_sup, float(eps), T, rate, infima[-1], tuple(infima))
    return DecayVerdict(INCONCLUSIVE, last_sup, float(eps), T, rate, None, tuple(infima))


def integral_certificate(y: Trajectory, omega: OmegaFn, phi: UnivariateFn, tol=1e-6,
                         divergence_bound=20.0, window_policy=None) -> TailVerdict:
    """Tail test of ``int omega(y(t)) phi(t) dt`` with the integrand tabulated along ``y``.

    Linear interpolation between samples; the horizon is the trajectory's.
    """
    t = np.asarray(y.times, dtype=float)
    values = np.asarray(omega(np.maximum(y.values, 0.0)), dtype=float) * np.asarray(phi(t), dtype=float)
    integrand = Tabulated.from_arrays(t, values, source="omega(y) * phi")
    return tail_verdict(integrand, tol=tol, window_policy=window_policy, divergence_bound=divergence_bound)


def floor_error(verdict: DecayVerdict, expected):
    """``|limit - expected|``, or inf when no floor was measured."""
    return math.inf if verdict.limit is None else abs(verdict.limit - expected)
