"""Hot numeric loops.

Every kernel here has a plain Python/numpy body that numba compiles on the
JIT path.  Set ``NLDECAY_DISABLE_JIT=1`` to run the numpy fallbacks instead;
``benchmarks/bench_kernels.py`` times both.

Univariate functions reach the kernels as packed float64 programs (see
``UnivariateFn.pack``):

    CONSTANT   [0, c]
    POWER_LAW  [1, c, alpha, shift]          c * (shift + x) ** -alpha
    EXPONENTIAL[2, c, lam]                   c * exp(-lam * x)
    TABULATED  [3, n, extrapolate, t_0..t_{n-1}, v_0..v_{n-1}]
    PIECEWISE  [4, m, b_0..b_{m-1}, off_0..off_{m-1}, <sub-programs>]

Piecewise pieces must themselves be non-piecewise programs.
"""

import math

import numpy as np

from ._accel import kernel, py, scalar_helper

CONSTANT = 0
POWER_LAW = 1
EXPONENTIAL = 2
TABULATED = 3
PIECEWISE = 4


@scalar_helper
def eval_simple(prog, off, x):
    code = int(prog[off])
    if code == CONSTANT:
        return prog[off + 1]
    if code == POWER_LAW:
        c = prog[off + 1]
        alpha = prog[off + 2]
        base = prog[off + 3] + x
        if c == 0.0:
            return 0.0
        if base == 0.0:
            if alpha < 0.0:
                return 0.0
            if alpha == 0.0:
                return c
            return math.inf
        return c * base ** (-alpha)
    if code == EXPONENTIAL:
        return prog[off + 1] * math.exp(-prog[off + 2] * x)
    if code == TABULATED:
        n = int(prog[off + 1])
        extrapolate = prog[off + 2] != 0.0
        t0 = off + 3
        v0 = t0 + n
        if x < prog[t0]:
            return math.nan
        if x >= prog[t0 + n - 1]:
            if x == prog[t0 + n - 1] or extrapolate:
                return prog[v0 + n - 1]
            return math.nan
        lo = 0
        hi = n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if prog[t0 + mid] <= x:
                lo = mid
            else:
                hi = mid
        ta = prog[t0 + lo]
        tb = prog[t0 + hi]
        w = (x - ta) / (tb - ta)
        return (1.0 - w) * prog[v0 + lo] + w * prog[v0 + hi]
    return math.nan


@scalar_helper
def eval_program(prog, x):
    """Evaluate a packed univariate program at a scalar point."""
    if int(prog[0]) != PIECEWISE:
        return eval_simple(prog, 0, x)
    m = int(prog[1])
    j = 0
    for i in range(m):
        if prog[2 + i] <= x:
            j = i
    off = int(prog[2 + m + j])
    return eval_simple(prog, off, x)


def _eval_program_py(prog, x):
    if int(prog[0]) != PIECEWISE:
        return py(eval_simple)(prog, 0, x)
    m = int(prog[1])
    j = 0
    for i in range(m):
        if prog[2 + i] <= x:
            j = i
    return py(eval_simple)(prog, int(prog[2 + m + j]), x)


# ---------------------------------------------------------------------------
# scalar surrogate  g' = -a(t) f(g) + b(t)
# ---------------------------------------------------------------------------


def _make_surrogate(ev):
    def loop(prog_f, a_nodes, b_nodes, g0, dt, nsteps, semi_implicit):
        values = np.empty(nsteps + 1)
        clipped = np.zeros(nsteps + 1, dtype=np.bool_)
        values[0] = g0
        g = g0
        last = nsteps
        for k in range(nsteps):
            a0 = a_nodes[2 * k]
            am = a_nodes[2 * k + 1]
            a1 = a_nodes[2 * k + 2]
            b0 = b_nodes[2 * k]
            bm = b_nodes[2 * k + 1]
            b1 = b_nodes[2 * k + 2]
            if semi_implicit:
                fg = ev(prog_f, max(g, 0.0))
                if g > 0.0:
                    gn = (g + dt * bm) / (1.0 + dt * am * fg / g)
                else:
                    gn = g + dt * (bm - am * fg)
            else:
                k1 = -a0 * ev(prog_f, max(g, 0.0)) + b0
                k2 = -am * ev(prog_f, max(g + 0.5 * dt * k1, 0.0)) + bm
                k3 = -am * ev(prog_f, max(g + 0.5 * dt * k2, 0.0)) + bm
                k4 = -a1 * ev(prog_f, max(g + dt * k3, 0.0)) + b1
                gn = g + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if not math.isfinite(gn):
                last = k
                break
            if gn < 0.0:
                gn = 0.0
                clipped[k + 1] = True
            values[k + 1] = gn
            g = gn
        return values[: last + 1], clipped[: last + 1]

    return loop


_surrogate_py = _make_surrogate(_eval_program_py)


def _surrogate_fallback(prog_f, a_nodes, b_nodes, g0, dt, nsteps, semi_implicit):
    return _surrogate_py(prog_f, a_nodes, b_nodes, float(g0), float(dt), int(nsteps), bool(semi_implicit))


surrogate_rk4 = kernel(fallback=_surrogate_fallback)(_make_surrogate(eval_program))
surrogate_rk4.__doc__ = """Fixed-step integration of g' = -a(t) f(g) + b(t).

``a_nodes``/``b_nodes`` hold the coefficients at t_k, t_k + dt/2, t_k + dt
(length 2*nsteps + 1).  Negative states are clipped to zero; the returned
boolean mask marks the clipped samples.  A non-finite state stops the loop
and the arrays come back truncated.
"""


# ---------------------------------------------------------------------------
# semi-implicit heat stepping  u' = gamma(t) [L u - h(u)] + amp(t) profile
# ---------------------------------------------------------------------------


@scalar_helper
def nonlinearity(kind, p, u):
    if kind == 1:
        return u * u * u
    if kind == 2:
        return u * abs(u) ** (p - 1.0)
    return 0.0


def _imex_heat_body(u0, gamma_mid, amp_mid, profile, h, dt, kind, p, lam1, record_every, snap_steps):
    m, n = u0.shape
    nsteps = gamma_mid.shape[0]
    nrec = nsteps // record_every + 1
    norms = np.zeros((m, nrec))
    resid = np.full(m, -np.inf)
    energy = np.full(m, -np.inf)
    nsnap = snap_steps.shape[0]
    snaps = np.zeros((nsnap, m, n))
    diff = np.zeros(nrec)
    diff_inc = -np.inf
    sq = math.sqrt(h)
    fprof = 0.0
    for i in range(n):
        fprof += profile[i] * profile[i]
    fprof = math.sqrt(h * fprof)

    u = u0.copy()
    rhs = np.empty(n)
    cp = np.empty(n)
    dp = np.empty(n)
    r_old = np.empty(m)
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += u[j, i] * u[j, i]
        r_old[j] = sq * math.sqrt(s)
        norms[j, 0] = r_old[j]
    d_old = 0.0
    if m > 1:
        s = 0.0
        for i in range(n):
            d = u[0, i] - u[1, i]
            s += d * d
        d_old = sq * math.sqrt(s)
        diff[0] = d_old
    for si in range(nsnap):
        if snap_steps[si] == 0:
            for j in range(m):
                for i in range(n):
                    snaps[si, j, i] = u[j, i]
    ok = nsteps
    for k in range(nsteps):
        g = gamma_mid[k]
        a = dt * g / (h * h)
        diag = 1.0 + 2.0 * a
        fnorm = amp_mid[k] * fprof
        finite = True
        for j in range(m):
            for i in range(n):
                rhs[i] = u[j, i] + dt * (amp_mid[k] * profile[i] - g * nonlinearity(kind, p, u[j, i]))
            # Thomas sweep for tridiag(-a, 1 + 2a, -a)
            cp[0] = -a / diag
            dp[0] = rhs[0] / diag
            for i in range(1, n):
                den = diag + a * cp[i - 1]
                cp[i] = -a / den
                dp[i] = (rhs[i] + a * dp[i - 1]) / den
            u[j, n - 1] = dp[n - 1]
            for i in range(n - 2, -1, -1):
                u[j, i] = dp[i] - cp[i] * u[j, i + 1]
            s = 0.0
            for i in range(n):
                s += u[j, i] * u[j, i]
            r_new = sq * math.sqrt(s)
            if not math.isfinite(r_new):
                finite = False
            rate = -g * lam1 * r_new + fnorm
            res = (r_new - r_old[j]) / dt - rate
            if res > resid[j]:
                resid[j] = res
            en = (r_new * r_new - r_old[j] * r_old[j]) / dt - 2.0 * r_new * rate
            if en > energy[j]:
                energy[j] = en
            r_old[j] = r_new
        if not finite:
            ok = k
            break
        if m > 1:
            s = 0.0
            for i in range(n):
                d = u[0, i] - u[1, i]
                s += d * d
            d_new = sq * math.sqrt(s)
            if d_new - d_old > diff_inc:
                diff_inc = d_new - d_old
            d_old = d_new
        if (k + 1) % record_every == 0:
            idx = (k + 1) // record_every
            for j in range(m):
                norms[j, idx] = r_old[j]
            diff[idx] = d_old
        for si in range(nsnap):
            if snap_steps[si] == k + 1:
                for j in range(m):
                    for i in range(n):
                        snaps[si, j, i] = u[j, i]
    return norms, resid, energy, diff, diff_inc, snaps, u, ok


def _imex_heat_fallback(u0, gamma_mid, amp_mid, profile, h, dt, kind, p, lam1, record_every, snap_steps):
    """Numpy twin of the heat kernel.

    The tridiagonal solve is done in the sine eigenbasis of the Dirichlet
    stencil, which diagonalises it exactly.
    """
    m, n = u0.shape
    nsteps = gamma_mid.shape[0]
    nrec = nsteps // record_every + 1
    idx = np.arange(1, n + 1)
    basis = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(idx, idx) * np.pi / (n + 1))
    eig = (4.0 / (h * h)) * np.sin(idx * np.pi / (2.0 * (n + 1))) ** 2
    sq = math.sqrt(h)
    fprof = math.sqrt(h * float(profile @ profile))
    snap_steps = np.asarray(snap_steps)

    def nl(v):
        if kind == 1:
            return v * v * v
        if kind == 2:
            return v * np.abs(v) ** (p - 1.0)
        return np.zeros_like(v)

    u = np.array(u0, dtype=float, copy=True)
    norms = np.zeros((m, nrec))
    diff = np.zeros(nrec)
    snaps = np.zeros((len(snap_steps), m, n))
    r_old = sq * np.linalg.norm(u, axis=1)
    norms[:, 0] = r_old
    d_old = sq * np.linalg.norm(u[0] - u[1]) if m > 1 else 0.0
    diff[0] = d_old
    snaps[snap_steps == 0] = u
    resid = np.full(m, -np.inf)
    energy = np.full(m, -np.inf)
    diff_inc = -np.inf
    ok = nsteps
    for k in range(nsteps):
        g = gamma_mid[k]
        rhs = u + dt * (amp_mid[k] * profile[None, :] - g * nl(u))
        u = ((rhs @ basis) / (1.0 + dt * g * eig)) @ basis
        r_new = sq * np.linalg.norm(u, axis=1)
        if not np.all(np.isfinite(r_new)):
            ok = k
            break
        rate = -g * lam1 * r_new + amp_mid[k] * fprof
        resid = np.maximum(resid, (r_new - r_old) / dt - rate)
        energy = np.maximum(energy, (r_new**2 - r_old**2) / dt - 2.0 * r_new * rate)
        r_old = r_new
        if m > 1:
            d_new = sq * np.linalg.norm(u[0] - u[1])
            diff_inc = max(diff_inc, d_new - d_old)
            d_old = d_new
        if (k + 1) % record_every == 0:
            norms[:, (k + 1) // record_every] = r_old
            diff[(k + 1) // record_every] = d_old
        hit = snap_steps == k + 1
        if hit.any():
            snaps[hit] = u
    return norms, resid, energy, diff, diff_inc, snaps, u, ok


imex_heat = kernel(fallback=_imex_heat_fallback)(_imex_heat_body)
imex_heat.__doc__ = """Semi-implicit Euler for a batch of 1D heat states.

Returns per-state norm records, the worst per-step residual of the norm
inequality, the worst energy-inequality residual, the norm of the difference
between the first two states, its largest per-step increase, the snapshots,
the final states, and the number of completed steps.
"""
