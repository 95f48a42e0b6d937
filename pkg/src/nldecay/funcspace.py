"""Nonnegative scalar and bivariate functions, quadrature, and tail tests.

Univariate functions are immutable objects evaluated on numpy arrays.  They
are built from a small set of families and can be written as text
descriptors, e.g. ``power_law(1, 0.5, 1)`` or
``piecewise((0, monomial(1, 1)), (1, constant(1)))``; see :func:`parse_fn`.
"""

from __future__ import annotations

import ast
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError, NumericError, ValidationError


def _as_array(t):
    return np.asarray(t, dtype=float)


class UnivariateFn:
    """Base class for nonnegative functions on [0, horizon]."""

    horizon = math.inf
    start = 0.0

    def __call__(self, t):
        arr = _as_array(t)
        if np.any(arr < self.start) or np.any(np.isnan(arr)):
            raise DomainError(f"{self.describe()} evaluated below {self.start}")
        if np.any(arr > self.horizon) and not getattr(self, "extrapolate", False):
            raise DomainError(f"{self.describe()} evaluated beyond horizon {self.horizon}")
        out = self._values(arr)
        return out if out.ndim else float(out)

    def _values(self, t):
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def pack(self) -> np.ndarray:
        """Flat program for the numba kernels (see :mod:`nldecay.kernels`)."""
        raise ValidationError(f"{self.describe()} cannot be packed for kernels")

    def __repr__(self):
        return f"<{type(self).__name__} {self.describe()}>"

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            other = Constant(float(other))
        return Combined("mul", self, other)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Constant(float(other))
        return Combined("add", self, other)

    __radd__ = __add__

    def __truediv__(self, other):
        return Combined("div", self, other)


@dataclass(frozen=True, repr=False)
class Constant(UnivariateFn):
    c: float

    def __post_init__(self):
        if not self.c >= 0:
            raise ValidationError(f"constant({self.c}) is negative")

    def _values(self, t):
        return np.full_like(t, self.c)

    def describe(self):
        return f"constant({self.c!r})"

    def pack(self):
        return np.array([kernels.CONSTANT, self.c], dtype=float)


@dataclass(frozen=True, repr=False)
class PowerLaw(UnivariateFn):
    """``c * (shift + t) ** -alpha``; a negative ``alpha`` gives a monomial."""

    c: float
    alpha: float
    shift: float = 1.0

    def __post_init__(self):
        if not self.c >= 0:
            raise ValidationError("power_law coefficient must be nonnegative")
        if self.shift < 0:
            raise ValidationError("power_law shift must be nonnegative")

    def _values(self, t):
        base = self.shift + t
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.c * np.power(base, -self.alpha)
        if self.alpha < 0:
            out = np.where(base == 0, 0.0, out)
        if self.c == 0:
            out = np.zeros_like(base)
        return out

    def describe(self):
        return f"power_law({self.c!r}, {self.alpha!r}, {self.shift!r})"

    def pack(self):
        return np.array([kernels.POWER_LAW, self.c, self.alpha, self.shift], dtype=float)


@dataclass(frozen=True, repr=False)
class Exponential(UnivariateFn):
    c: float
    lam: float

    def __post_init__(self):
        if not self.c >= 0:
            raise ValidationError("exponential coefficient must be nonnegative")

    def _values(self, t):
        return self.c * np.exp(-self.lam * t)

    def describe(self):
        return f"exponential({self.c!r}, {self.lam!r})"

    def pack(self):
        return np.array([kernels.EXPONENTIAL, self.c, self.lam], dtype=float)


@dataclass(frozen=True, repr=False)
class Tabulated(UnivariateFn):
    """Linear interpolation through knots.

    Queries past the last knot raise unless ``extrapolate`` is set, in which
    case the last value is held.
    """

    times: tuple
    values: tuple
    extrapolate: bool = False
    source: str | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValidationError("tabulated function needs matching 1-D grids of length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("tabulated grid must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError("tabulated values must be finite and nonnegative")
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_v", v)

    @classmethod
    def from_arrays(cls, times, values, extrapolate=False, source=None):
        return cls(tuple(np.asarray(times, float).tolist()), tuple(np.asarray(values, float).tolist()),
                   extrapolate, source)

    @property
    def start(self):
        return float(self._t[0])

    @property
    def horizon(self):
        return math.inf if self.extrapolate else float(self._t[-1])

    @property
    def knots(self):
        return self._t, self._v

    def _values(self, t):
        return np.interp(t, self._t, self._v)

    def describe(self):
        if self.source:
            return f"tabulated({self.source!r}, extrapolate={self.extrapolate})"
        return f"tabulated(<{self._t.size} knots on [{self._t[0]:g}, {self._t[-1]:g}]>)"

    def pack(self):
        n = self._t.size
        return np.concatenate([[kernels.TABULATED, n, float(self.extrapolate)], self._t, self._v])

    def integral(self, s, t):
        """Exact integral of the interpolant over [s, t]."""
        tt, vv = self._t, self._v
        hi = min(t, tt[-1])
        total = 0.0
        if hi > s:
            inner = tt[(tt > s) & (tt < hi)]
            xs = np.concatenate([[s], inner, [hi]])
            total = _trapz(np.interp(xs, tt, vv), xs)
        if t > tt[-1]:
            total += (t - max(s, tt[-1])) * vv[-1]
        return float(total)


def _trapz(y, x):
    return 0.5 * np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]))


@dataclass(frozen=True, repr=False)
class Piecewise(UnivariateFn):
    """Pieces ``(breakpoint, fn)``; piece i is active on [b_i, b_{i+1})."""

    pieces: tuple

    def __post_init__(self):
        if not self.pieces:
            raise ValidationError("piecewise function needs at least one piece")
        bps = [float(b) for b, _ in self.pieces]
        if bps[0] != 0.0:
            raise ValidationError("piecewise breakpoints must start at 0")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValidationError("piecewise breakpoints must be strictly increasing")
        for _, fn in self.pieces:
            if not isinstance(fn, UnivariateFn):
                raise ValidationError("piecewise pieces must be univariate functions")

    @property
    def breakpoints(self):
        return np.array([b for b, _ in self.pieces], dtype=float)

    @property
    def horizon(self):
        return self.pieces[-1][1].horizon

    def _values(self, t):
        bps = self.breakpoints
        which = np.searchsorted(bps, t, side="right") - 1
        out = np.empty_like(t)
        for i, (_, fn) in enumerate(self.pieces):
            sel = which == i
            if np.any(sel):
                out[sel] = fn._values(t[sel])
        return out

    def describe(self):
        inner = ", ".join(f"({b!r}, {fn.describe()})" for b, fn in self.pieces)
        return f"piecewise({inner})"

    def pack(self):
        m = len(self.pieces)
        subs = [fn.pack() for _, fn in self.pieces]
        if any(int(s[0]) == kernels.PIECEWISE for s in subs):
            raise ValidationError("nested piecewise functions cannot be packed")
        head = 2 + 2 * m
        offsets, pos = [], head
        for s in subs:
            offsets.append(pos)
            pos += s.size
        return np.concatenate([[kernels.PIECEWISE, m], self.breakpoints, offsets, *subs]).astype(float)


@dataclass(frozen=True, repr=False)
class Combined(UnivariateFn):
    """Pointwise sum, product or quotient of two functions."""

    op: str
    left: UnivariateFn
    right: UnivariateFn

    def __post_init__(self):
        if self.op not in ("add", "mul", "div"):
            raise ValidationError(f"unknown combination {self.op}")

    @property
    def horizon(self):
        return min(self.left.horizon, self.right.horizon)

    @property
    def start(self):
        return max(self.left.start, self.right.start)

    def _values(self, t):
        a = self.left._values(t)
        b = self.right._values(t)
        if self.op == "add":
            return a + b
        if self.op == "mul":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a == 0, 0.0, a / b)

    def describe(self):
        sym = {"add": "+", "mul": "*", "div": "/"}[self.op]
        return f"({self.left.describe()} {sym} {self.right.describe()})"


# ---------------------------------------------------------------------------
# constructors and the textual descriptor schema
# ---------------------------------------------------------------------------


def constant(c):
    return Constant(float(c))


def power_law(c, alpha, shift=1.0):
    return PowerLaw(float(c), float(alpha), float(shift))


def monomial(c, p):
    """``c * t ** p``."""
    return PowerLaw(float(c), -float(p), 0.0)


def exponential(c, lam):
    return Exponential(float(c), float(lam))


def piecewise(*pieces):
    if len(pieces) == 1 and isinstance(pieces[0], (list, tuple)) and pieces[0] and isinstance(pieces[0][0], tuple):
        pieces = tuple(pieces[0])
    return Piecewise(tuple((float(b), fn) for b, fn in pieces))


def tabulated(times, values=None, extrapolate=False, base_dir=None):
    """Tabulated function from arrays, or from a two-column CSV when ``values`` is None."""
    if values is None:
        path = Path(times)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        t, v = load_csv(path)
        return Tabulated.from_arrays(t, v, extrapolate, source=str(times))
    return Tabulated.from_arrays(times, values, extrapolate)


def load_csv(path):
    """Read a two-column (time, value) CSV; a non-numeric header and ``#`` lines are skipped."""
    ts, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(line for line in fh if not line.lstrip().startswith("#")):
            if not row:
                continue
            try:
                t, v = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if ts:
                    raise ValidationError(f"{path}: malformed row {row}")
                continue
            ts.append(t)
            vs.append(v)
    return np.array(ts), np.array(vs)


_FAMILIES = {
    "constant": constant,
    "power_law": power_law,
    "monomial": monomial,
    "exponential": exponential,
    "piecewise": piecewise,
}


def parse_fn(text, base_dir=None) -> UnivariateFn:
    """Parse a descriptor such as ``power_law(1, 0.5, 1)``.

    Families: ``constant(c)``, ``power_law(c, alpha, shift=1)``,
    ``monomial(c, p)``, ``exponential(c, lam)``,
    ``piecewise((b0, fn0), (b1, fn1), ...)`` and
    ``tabulated("file.csv", extrapolate=False)``.  A bare number is a constant.
    """
    if isinstance(text, (int, float)):
        return constant(text)
    if isinstance(text, UnivariateFn):
        return text
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse function descriptor {text!r}: {exc.msg}") from None
    try:
        return _build(tree.body, base_dir)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad function descriptor {text!r}: {exc}") from None


def _literal(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str, bool)):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_literal(node.operand)
    raise ConfigError(f"expected a literal, got {ast.dump(node)}")


def _build(node, base_dir):
    if isinstance(node, (ast.Constant, ast.UnaryOp)):
        return constant(_literal(node))
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ConfigError("function descriptor must be a family call")
    name = node.func.id
    if name == "tabulated":
        args = [_literal(a) for a in node.args]
        kwargs = {k.arg: _literal(k.value) for k in node.keywords}
        return tabulated(*args, base_dir=base_dir, **kwargs)
    if name == "piecewise":
        pieces = []
        for arg in node.args:
            if not isinstance(arg, ast.Tuple) or len(arg.elts) != 2:
                raise ConfigError("piecewise arguments must be (breakpoint, fn) pairs")
            pieces.append((float(_literal(arg.elts[0])), _build(arg.elts[1], base_dir)))
        return piecewise(*pieces)
    if name not in _FAMILIES:
        raise ConfigError(f"unknown function family {name!r}")
    args = [_literal(a) for a in node.args]
    kwargs = {k.arg: _literal(k.value) for k in node.keywords}
    return _FAMILIES[name](*args, **kwargs)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def evaluate(fn: UnivariateFn, t):
    """``fn(t)`` with the domain checks of the family."""
    return fn(t)


def _check_finite(values, where):
    if not np.all(np.isfinite(values)):
        raise NumericError(f"non-finite integrand value on {where}")


def simpson_panels(fn, a, b, tol, max_depth=48, indexed=False):
    """Adaptive Simpson on many panels at once.

    ``fn`` receives a flat array of abscissae (and, if ``indexed``, the panel
    index of each abscissa).  ``tol`` is the absolute tolerance of each panel.
    Returns per-panel integrals and error estimates.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    tol = np.broadcast_to(np.asarray(tol, dtype=float), a.shape).copy()
    npan = a.size
    result = np.zeros(npan)
    error = np.zeros(npan)
    if npan == 0:
        return result, error

    def call(x, owner):
        y = fn(x, owner) if indexed else fn(x)
        y = np.asarray(y, dtype=float)
        _check_finite(y, "quadrature panel")
        return y

    owner = np.arange(npan)
    m = 0.5 * (a + b)
    y = call(np.concatenate([a, m, b]), np.concatenate([owner, owner, owner]))
    fa, fm, fb = y[:npan], y[npan:2 * npan], y[2 * npan:]
    lo, hi = a, b
    whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)
    for depth in range(max_depth):
        if lo.size == 0:
            break
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        k = lo.size
        y = call(np.concatenate([lm, rm]), np.concatenate([owner, owner]))
        flm, frm = y[:k], y[k:]
        left = (mid - lo) / 6.0 * (fa + 4.0 * flm + fm)
        right = (hi - mid) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        done = np.abs(delta) <= 15.0 * tol
        if depth == max_depth - 1:
            done[:] = True
        if np.any(done):
            np.add.at(result, owner[done], (left + right + delta / 15.0)[done])
            np.add.at(error, owner[done], np.abs(delta[done]) / 15.0)
        go = ~done
        if not np.any(go):
            break
        lo, mid, hi = lo[go], mid[go], hi[go]
        fa, flm, fm, frm, fb = fa[go], flm[go], fm[go], frm[go], fb[go]
        left, right, own, half = left[go], right[go], owner[go], tol[go] / 2.0
        lo = np.concatenate([lo, mid])
        hi = np.concatenate([mid, hi])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([flm, frm]), np.concatenate([fm, fb])
        whole = np.concatenate([left, right])
        owner = np.concatenate([own, own])
        tol = np.concatenate([half, half])
    return result, error


def _panel_edges(s, t):
    if t - s <= 1.0 or t <= 8.0 * max(s, 1.0):
        return np.linspace(s, t, 9)
    lo = max(s, 1.0)
    edges = [np.linspace(s, lo, 5)] if lo > s else []
    k = max(int(math.ceil(math.log2(t / lo))), 1)
    edges.append(np.geomspace(lo, t, k + 1))
    return np.unique(np.concatenate(edges))


def _breaks_within(fn, s, t):
    out = []
    if isinstance(fn, Piecewise):
        out.extend(float(b) for b in fn.breakpoints if s < b < t)
        for _, sub in fn.pieces:
            out.extend(_breaks_within(sub, s, t))
    elif isinstance(fn, Combined):
        out.extend(_breaks_within(fn.left, s, t))
        out.extend(_breaks_within(fn.right, s, t))
    elif isinstance(fn, Tabulated):
        tt = fn.knots[0]
        inner = tt[(tt > s) & (tt < t)]
        if inner.size <= 4096:
            out.extend(inner.tolist())
    return out


def integrate(fn: UnivariateFn, s, t, tol=1e-10):
    """Integral of ``fn`` over [s, t] by adaptive Simpson.

    The estimated error is kept below ``tol * (1 + |result|)``.  Tabulated
    functions are integrated exactly.  Raises :class:`NumericError` if the
    integrand is not finite somewhere it is sampled.
    """
    s, t = float(s), float(t)
    if not (0 <= s <= t) and not (fn.start <= s <= t):
        raise DomainError(f"integration bounds must satisfy 0 <= s <= t, got [{s}, {t}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if s == t:
        return 0.0
    if t > fn.horizon or s < fn.start:
        raise DomainError(f"[{s}, {t}] leaves the domain of {fn.describe()}")
    if isinstance(fn, Tabulated):
        return fn.integral(s, t)
    cuts = sorted(set(_breaks_within(fn, s, t)))
    points = [s, *cuts, t]
    edges = np.unique(np.concatenate([_panel_edges(p, q) for p, q in zip(points, points[1:])]))
    a, b = edges[:-1], edges[1:]
    coarse, _ = simpson_panels(fn._values, a, b, np.inf, max_depth=1)
    scale = 1.0 + abs(float(coarse.sum()))
    for _ in range(4):
        weights = (b - a) / (t - s)
        vals, errs = simpson_panels(fn._values, a, b, tol * scale * weights)
        total = float(vals.sum())
        if errs.sum() <= tol * (1.0 + abs(total)):
            return total
        scale = min(scale, 1.0 + abs(total)) / 4.0
    return total


def integrate_cumulative(fn: UnivariateFn, grid, tol=1e-10):
    """Cumulative integral of ``fn`` from ``grid[0]`` evaluated on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("cumulative grid must be strictly increasing")
    if isinstance(fn, Tabulated):
        pieces = np.array([fn.integral(p, q) for p, q in zip(grid[:-1], grid[1:])])
    else:
        total_scale = 1.0 + abs(integrate(fn, grid[0], grid[-1], tol))
        w = np.diff(grid) / (grid[-1] - grid[0])
        pieces, _ = simpson_panels(fn._values, grid[:-1], grid[1:], tol * total_scale * w)
    return np.concatenate([[0.0], np.cumsum(pieces)])


@dataclass(frozen=True)
class WindowPolicy:
    """Doubling windows [T, 2T] starting at ``first``."""

    first: float = 1.0
    max_doublings: int = 64
    ratio: float = 0.9
    quad_tol: float = 1e-10


@dataclass(frozen=True)
class TailVerdict:
    status: str  # converged | diverged | inconclusive
    estimate: float
    horizon: float
    partial: float
    contributions: tuple = field(default=(), repr=False)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def diverged(self):
        return self.status == "diverged"

    def witness(self):
        return {"estimate": self.estimate, "partial": self.partial, "horizon": self.horizon,
                "last_window": self.contributions[-1] if self.contributions else 0.0}


def tail_verdict(fn: UnivariateFn, tol=1e-6, window_policy=None, divergence_bound=20.0) -> TailVerdict:
    """Decide convergence of the integral of ``fn`` over [0, inf) on doubling windows.

    Converged once the window contributions are below ``tol`` and shrink
    geometrically (ratio <= ``window_policy.ratio`` twice in a row); the
    estimate adds the geometric tail.  Diverged once the partial integral
    exceeds ``divergence_bound`` while contributions are non-decreasing.
    Anything else is inconclusive at the horizon reached.
    """
    pol = window_policy or WindowPolicy()
    lo = fn.start
    first = lo + pol.first
    partial = integrate(fn, lo, first, pol.quad_tol) if first <= fn.horizon else 0.0
    contribs = []
    reached = lo
    if first > fn.horizon:
        return TailVerdict("inconclusive", math.nan, reached, partial, ())
    reached = first
    width = pol.first
    for _ in range(pol.max_doublings):
        a, b = reached, reached + width
        if b > fn.horizon:
            break
        c = integrate(fn, a, b, pol.quad_tol)
        contribs.append(c)
        partial += c
        reached = b
        width *= 2.0
        if len(contribs) >= 3:
            c0, c1, c2 = contribs[-3:]
            if c2 <= tol and c2 <= pol.ratio * c1 and c1 <= pol.ratio * c0:
                q = c2 / c1 if c1 > 0 else 0.0
                est = partial + (c2 * q / (1.0 - q) if q > 0 else 0.0)
                return TailVerdict("converged", est, reached, partial, tuple(contribs))
            if c2 == 0.0 and c1 == 0.0 and c0 == 0.0:
                return TailVerdict("converged", partial, reached, partial, tuple(contribs))
            if partial > divergence_bound and c2 >= c1 >= c0:
                return TailVerdict("diverged", math.inf, reached, partial, tuple(contribs))
    return TailVerdict("inconclusive", math.nan, reached, partial, tuple(contribs))


def monotone_check(fn, interval=(0.0, 10.0), samples=1001, tol=1e-12) -> bool:
    """True iff sampled values on ``interval`` never decrease by more than ``tol``."""
    if samples < 2:
        raise ValueError("monotone_check needs at least 2 samples")
    grid = np.linspace(interval[0], interval[1], int(samples))
    vals = np.asarray(fn(grid), dtype=float)
    return bool(np.all(np.diff(vals) >= -tol * np.maximum(1.0, np.abs(vals[:-1]))))


@dataclass(frozen=True)
class OmegaFn:
    """A modulus: continuous, non-decreasing, vanishing only at 0."""

    base: UnivariateFn
    monotone_certified: bool = False
    tol: float = 1e-12

    def __post_init__(self):
        zero = float(self.base(0.0))
        if abs(zero) > self.tol:
            raise ValidationError(f"omega(0) = {zero} is not 0")
        grid = np.geomspace(1e-8, 1e4, 241)
        if np.any(self.base(grid) <= 0):
            raise ValidationError("omega vanishes at a sampled positive point")

    def __call__(self, t):
        return self.base(t)

    def certify(self, interval=(0.0, 100.0), samples=2001) -> "OmegaFn":
        """Run :func:`monotone_check` and return a copy with the flag set."""
        if not monotone_check(self.base, interval, samples, self.tol):
            raise ValidationError(f"omega {self.base.describe()} is not non-decreasing")
        return OmegaFn(self.base, True, self.tol)


def identity_omega() -> OmegaFn:
    return OmegaFn(monomial(1.0, 1.0)).certify()


@dataclass(frozen=True)
class InfEstimate:
    value: float
    eps: float
    horizon: float
    samples: int
    argmin: float


def inf_tail(f: UnivariateFn, eps, horizon, samples=2001) -> InfEstimate:
    """Grid estimate of ``inf_{eps <= x <= horizon} f(x)``."""
    if not eps > 0 or not horizon > eps:
        raise ValueError("inf_tail needs 0 < eps < horizon")
    grid = np.unique(np.concatenate([np.linspace(eps, horizon, samples), np.geomspace(eps, horizon, samples)]))
    vals = np.asarray(f(grid), dtype=float)
    i = int(np.argmin(vals))
    return InfEstimate(float(vals[i]), float(eps), float(horizon), int(grid.size), float(grid[i]))


# ---------------------------------------------------------------------------
# bivariate functions
# ---------------------------------------------------------------------------


class BivariateFn:
    """Nonnegative ``f(x, y)`` with x = time and y = state."""

    probe_x = np.linspace(0.0, 50.0, 51)
    probe_y = np.linspace(0.0, 10.0, 41)

    def __call__(self, x, y):
        x = _as_array(x)
        y = _as_array(y)
        if np.any(x < 0) or np.any(y < 0):
            raise DomainError("bivariate function is defined on [0, inf) x [0, inf)")
        return self._values(x, y)

    def _values(self, x, y):
        raise NotImplementedError

    def _validate(self):
        vals = self._values(self.probe_x[:, None], self.probe_y[None, :])
        if not np.all(np.isfinite(vals)):
            raise ValidationError(f"{self.describe()} is not finite on the probe grid")
        if np.any(vals < 0):
            raise ValidationError(f"{self.describe()} takes negative values")

    def sup_slice(self, x, v, grid=257):
        return sup_slice(self, x, v, grid)


@dataclass(frozen=True)
class Separable(BivariateFn):
    """``g(x) * phi(y) + h(x)``."""

    g: UnivariateFn
    phi: UnivariateFn
    h: UnivariateFn = field(default_factory=lambda: Constant(0.0))

    def __post_init__(self):
        self._validate()

    def _values(self, x, y):
        return self.g._values(x) * self.phi._values(y) + self.h._values(x)

    def describe(self):
        return f"separable({self.g.describe()}, {self.phi.describe()}, {self.h.describe()})"


_EXPR_FUNCS = {"min": np.minimum, "max": np.maximum}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide, ast.Pow: np.power}
_CMPS = {ast.Lt: np.less, ast.LtE: np.less_equal, ast.Gt: np.greater, ast.GtE: np.greater_equal}


@dataclass(frozen=True)
class Expression(BivariateFn):
    """Closed-form ``f(x, y)`` over ``+ - * / **``, ``min``, ``max`` and ``where(cond, a, b)``.

    ``where`` conditions compare ``y`` with a constant; the two branches must
    agree at that boundary.
    """

    text: str
    continuity_tol: float = 1e-9

    def __post_init__(self):
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        self._check(tree.body)
        object.__setattr__(self, "_tree", tree.body)
        self._validate()
        self._check_continuity(tree.body)

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            pass
        elif isinstance(node, ast.Name) and node.id in ("x", "y"):
            pass
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            if node.func.id in _EXPR_FUNCS and len(node.args) == 2:
                for a in node.args:
                    self._check(a)
            elif node.func.id == "where" and len(node.args) == 3:
                cond = node.args[0]
                if not (isinstance(cond, ast.Compare) and len(cond.ops) == 1 and type(cond.ops[0]) in _CMPS):
                    raise ConfigError("where() needs a single comparison")
                self._check(cond.left)
                self._check(cond.comparators[0])
                self._check(node.args[1])
                self._check(node.args[2])
            else:
                raise ConfigError(f"unsupported call in expression {self.text!r}")
        else:
            raise ConfigError(f"unsupported syntax in expression {self.text!r}")

    def _eval(self, node, x, y):
        if isinstance(node, ast.BinOp):
            with np.errstate(divide="ignore", invalid="ignore"):
                return _BINOPS[type(node.op)](self._eval(node.left, x, y), self._eval(node.right, x, y))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, x, y)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return np.float64(node.value)
        if isinstance(node, ast.Name):
            return x if node.id == "x" else y
        name = node.func.id
        if name in _EXPR_FUNCS:
            return _EXPR_FUNCS[name](self._eval(node.args[0], x, y), self._eval(node.args[1], x, y))
        cond = node.args[0]
        mask = _CMPS[type(cond.ops[0])](self._eval(cond.left, x, y), self._eval(cond.comparators[0], x, y))
        return np.where(mask, self._eval(node.args[1], x, y), self._eval(node.args[2], x, y))

    def _values(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.asarray(self._eval(self._tree, x, y), dtype=float) + np.zeros(x.shape)

    def _check_continuity(self, root):
        for node in ast.walk(root):
            if not (isinstance(node, ast.Call) and getattr(node.func, "id", "") == "where"):
                continue
            cond = node.args[0]
            left, right = cond.left, cond.comparators[0]
            if isinstance(left, ast.Name) and left.id == "y" and isinstance(right, ast.Constant):
                b = float(right.value)
            elif isinstance(right, ast.Name) and right.id == "y" and isinstance(left, ast.Constant):
                b = float(left.value)
            else:
                continue
            xs = self.probe_x
            ys = np.full_like(xs, b)
            lhs = self._eval(node.args[1], xs, ys) + 0 * xs
            rhs = self._eval(node.args[2], xs, ys) + 0 * xs
            if np.max(np.abs(lhs - rhs)) > self.continuity_tol * (1 + np.max(np.abs(lhs))):
                raise ValidationError(f"expression {self.text!r} is discontinuous across y = {b}")

    def describe(self):
        return f"expr({self.text})"


@dataclass(frozen=True)
class GridSampled(BivariateFn):
    """Bilinear interpolation of values on an (x, y) grid."""

    xs: tuple
    ys: tuple
    values: tuple

    def __post_init__(self):
        xs = np.asarray(self.xs, float)
        ys = np.asarray(self.ys, float)
        vals = np.asarray(self.values, float)
        if vals.shape != (xs.size, ys.size):
            raise ValidationError("grid values must have shape (len(xs), len(ys))")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise ValidationError("grid axes must be strictly increasing")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValidationError("grid values must be finite and nonnegative")
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        object.__setattr__(self, "_v", vals)

    @classmethod
    def from_arrays(cls, xs, ys, values):
        return cls(tuple(np.asarray(xs, float)), tuple(np.asarray(ys, float)),
                   tuple(map(tuple, np.asarray(values, float))))

    def _values(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        xs, ys, v = self._xs, self._ys, self._v
        if np.any(x > xs[-1]) or np.any(y > ys[-1]) or np.any(x < xs[0]) or np.any(y < ys[0]):
            raise DomainError("query outside the sampled grid")
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        j = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, ys.size - 2)
        wx = (x - xs[i]) / (xs[i + 1] - xs[i])
        wy = (y - ys[j]) / (ys[j + 1] - ys[j])
        return ((1 - wx) * (1 - wy) * v[i, j] + wx * (1 - wy) * v[i + 1, j]
                + (1 - wx) * wy * v[i, j + 1] + wx * wy * v[i + 1, j + 1])

    def describe(self):
        return f"grid(<{len(self.xs)}x{len(self.ys)}>)"


def zero_bivariate() -> BivariateFn:
    return Expression("0")


def parse_bivariate(desc, base_dir=None) -> BivariateFn:
    """A string is an :class:`Expression`; ``{"separable": {"g", "phi", "h"}}`` builds a separable form."""
    if isinstance(desc, BivariateFn):
        return desc
    if isinstance(desc, (int, float)):
        return Expression(repr(float(desc)))
    if isinstance(desc, str):
        return Expression(desc)
    if isinstance(desc, dict) and "separable" in desc:
        parts = desc["separable"]
        return Separable(parse_fn(parts["g"], base_dir), parse_fn(parts["phi"], base_dir),
                         parse_fn(parts.get("h", "constant(0)"), base_dir))
    raise ConfigError(f"cannot build a bivariate function from {desc!r}")


def sup_slice(f: BivariateFn, x, v, grid=257):
    """``max_{0 <= zeta <= v} f(x, zeta)``, vectorised over ``x``.

    Exact (endpoint evaluation) for separable forms whose state factor is
    certified non-decreasing on [0, v]; otherwise a ``grid``-point scan of
    [0, v] refined once around the argmax.
    """
    if grid is None or int(grid) < 2:
        raise ConfigError("sup_slice grid resolution must be at least 2")
    grid = int(grid)
    x = _as_array(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    v = float(v)
    if v < 0 or np.any(x < 0):
        raise DomainError("sup_slice needs x >= 0 and v >= 0")
    if v == 0:
        out = f(x, np.zeros_like(x))
        return float(out[0]) if scalar else out
    if isinstance(f, Separable) and monotone_check(f.phi, (0.0, v), 257):
        out = f.g(x) * float(f.phi(v)) + f.h(x)
        return float(out[0]) if scalar else out
    zeta = np.linspace(0.0, v, grid)
    vals = f(x[:, None], zeta[None, :])
    j = np.argmax(vals, axis=1)
    best = vals[np.arange(x.size), j]
    lo = zeta[np.maximum(j - 1, 0)]
    hi = zeta[np.minimum(j + 1, grid - 1)]
    fine = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, grid)[None, :]
    refined = f(np.broadcast_to(x[:, None], fine.shape), fine).max(axis=1)
    out = np.maximum(best, refined)
    return float(out[0]) if scalar else out
