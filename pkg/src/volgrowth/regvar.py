"""Sublinear nonlinearity families and their growth clock.

A nonlinearity f is a positive function, regularly varying at infinity
with index ``beta`` in [0, 1).  The growth clock is

    big_F(x) = integral from 1 to x of du / f(u),

whose inverse maps elapsed clock time back to solution magnitude.  The
slowly varying companion ``ell(x) = (f(x) / x**beta) ** (1/(1-beta))``
gives a quadrature-free asymptotic inverse whenever the self-neglecting
ratio ell(x * ell(x)) / ell(x) tends to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError
from .quadrature import integrate, panel_integrals

# Default inner shift for the iterated-log families: keeps log(log(.))
# positive and defined on all of (0, inf) without changing asymptotics.
E_E = math.exp(math.e)

_SELF_CHECK_GRID = (1e2, 1e4, 1e6, 1e8, 1e10, 1e12)
_SELF_CHECK_TOL = 0.10


def _as_positive_array(name: str, x):
    arr = np.asarray(x, dtype=float)
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr <= 0.0)):
        raise DomainError(f"{name} requires positive finite arguments")
    return arr


class Nonlinearity:
    """Base class; concrete families implement ``_f`` on positive arrays."""

    index: float

    def _f(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # subclasses with interior kinks list them (in log coordinates) so the
    # quadrature panels can be aligned with them
    def _log_breakpoints(self) -> tuple[float, ...]:
        return ()


def _check_index(beta: float) -> float:
    beta = float(beta)
    if not (math.isfinite(beta) and 0.0 <= beta < 1.0):
        raise DomainError(f"nonlinearity index must lie in [0, 1), got {beta!r}")
    return beta


def _check_zero_index_monotone(nl: Nonlinearity) -> None:
    """For index 0 the tail of f must be nondecreasing (sampled check)."""
    xs = np.logspace(2, 12, 41)
    try:
        vals = f_eval(nl, xs)
    except DomainError:
        return
    tail = vals[len(vals) // 2:]
    if np.any(np.diff(tail) < -1e-12 * tail[:-1]):
        raise DomainError(
            "index-0 nonlinearity must be nondecreasing at infinity; "
            "sampled tail decreases"
        )


@dataclass(frozen=True)
class PurePower(Nonlinearity):
    """f(x) = a * x**beta."""

    a: float
    index: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise DomainError(f"scale must be positive, got {self.a!r}")
        _check_index(self.index)

    def _f(self, x):
        return self.a * x ** self.index


@dataclass(frozen=True)
class PowerLogLog(Nonlinearity):
    """f(x) = a * x**beta * log(log(shift + x**alpha))."""

    a: float
    index: float
    alpha: float
    shift: float = E_E

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise DomainError(f"scale must be positive, got {self.a!r}")
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise DomainError(f"inner exponent must be positive, got {self.alpha!r}")
        if self.shift < 0.0:
            raise DomainError(f"shift must be >= 0, got {self.shift!r}")
        _check_index(self.index)
        if self.index == 0.0:
            _check_zero_index_monotone(self)

    def _f(self, x):
        inner = self.shift + x ** self.alpha
        if np.any(inner <= 1.0):
            raise DomainError(
                "log(log(.)) undefined here; use the default shift for "
                "arguments this small"
            )
        ll = np.log(np.log(inner))
        if np.any(ll <= 0.0):
            raise DomainError("nonlinearity not positive at this argument")
        return self.a * x ** self.index * ll


@dataclass(frozen=True)
class PowerSinLogLog(Nonlinearity):
    """f(x) = x**beta * (2 + sin(log(log(shift + x))))."""

    index: float
    shift: float = E_E

    def __post_init__(self):
        _check_index(self.index)
        if self.shift < 0.0:
            raise DomainError(f"shift must be >= 0, got {self.shift!r}")
        if self.index == 0.0:
            _check_zero_index_monotone(self)

    def _f(self, x):
        inner = self.shift + x
        if np.any(inner <= 1.0):
            raise DomainError(
                "log(log(.)) undefined here; use the default shift for "
                "arguments this small"
            )
        return x ** self.index * (2.0 + np.sin(np.log(np.log(inner))))


@dataclass(frozen=True)
class UserTable(Nonlinearity):
    """Sampled monotone nonlinearity, interpolated log-log linearly.

    Outside the table the declared index extends f as a power law, which
    makes the regular-variation self-check exact by construction; the
    table itself is the trusted region.
    """

    x: tuple[float, ...]
    f: tuple[float, ...]
    index: float

    def __post_init__(self):
        xs = np.asarray(self.x, dtype=float)
        fs = np.asarray(self.f, dtype=float)
        if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 2:
            raise DomainError("table needs matching 1-d x and f with >= 2 rows")
        if np.any(xs <= 0) or np.any(fs <= 0):
            raise DomainError("table values must be positive")
        if np.any(np.diff(xs) <= 0):
            raise DomainError("table abscissae must be strictly increasing")
        if np.any(np.diff(fs) < 0):
            raise DomainError("table must sample a nondecreasing function")
        _check_index(self.index)
        object.__setattr__(self, "x", tuple(map(float, xs)))
        object.__setattr__(self, "f", tuple(map(float, fs)))

    def _f(self, x):
        xs = np.asarray(self.x)
        fs = np.asarray(self.f)
        lx = np.log(np.asarray(x, dtype=float))
        out = np.exp(np.interp(lx, np.log(xs), np.log(fs)))
        lo, hi = xs[0], xs[-1]
        x = np.asarray(x, dtype=float)
        below = x < lo
        above = x > hi
        if np.any(below):
            out = np.where(below, fs[0] * (x / lo) ** self.index, out)
        if np.any(above):
            out = np.where(above, fs[-1] * (x / hi) ** self.index, out)
        return out

    def _log_breakpoints(self):
        return tuple(math.log(v) for v in self.x)


def f_eval(nl: Nonlinearity, x):
    """Evaluate f at positive x (scalar or array)."""
    arr = _as_positive_array("f_eval", x)
    out = nl._f(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def big_F(nl: Nonlinearity, x: float) -> float:
    """Growth clock F(x) = integral_1^x du / f(u); F(1) = 0.

    Pure powers use the antiderivative; other families integrate
    exp(v)/f(exp(v)) over v = log u on panels of bounded width, so the
    node count stays bounded even for x around 1e30.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"big_F requires positive finite x, got {x!r}")
    if isinstance(nl, PurePower):
        b = nl.index
        return (x ** (1.0 - b) - 1.0) / (nl.a * (1.0 - b))
    if x == 1.0:
        return 0.0

    def integrand(v):
        u = np.exp(v)
        return u / nl._f(u)

    lo, hi = (0.0, math.log(x)) if x > 1.0 else (math.log(x), 0.0)
    cuts = sorted(c for c in nl._log_breakpoints() if lo < c < hi)
    total = 0.0
    left = lo
    for c in list(cuts) + [hi]:
        total += integrate(integrand, left, c)
        left = c
    return total if x > 1.0 else -total


def big_F_inverse(nl: Nonlinearity, y: float) -> float:
    """Inverse of the growth clock: the x > 0 with big_F(nl, x) = y."""
    y = float(y)
    if not math.isfinite(y):
        raise DomainError(f"big_F_inverse requires finite y, got {y!r}")
    if isinstance(nl, PurePower):
        b = nl.index
        arg = 1.0 + nl.a * (1.0 - b) * y
        if arg <= 0.0:
            raise DomainError("target below the range of the growth clock")
        return arg ** (1.0 / (1.0 - b))
    if y == 0.0:
        return 1.0

    # bracket by doubling (or halving below 1)
    if y > 0.0:
        lo, hi = 1.0, 2.0
        for _ in range(1100):
            if big_F(nl, hi) >= y:
                break
            lo, hi = hi, hi * 2.0
        else:
            raise NumericError("bracketing failed: growth clock target too large")
    else:
        lo, hi = 0.5, 1.0
        for _ in range(1100):
            if big_F(nl, lo) <= y:
                break
            lo, hi = lo / 2.0, lo
        else:
            raise NumericError("bracketing failed: growth clock target too negative")

    # geometric bisection to ~1e-3 relative, then Newton with F' = 1/f
    while hi - lo > 1e-3 * lo:
        mid = math.sqrt(lo * hi)
        if big_F(nl, mid) < y:
            lo = mid
        else:
            hi = mid
    x = math.sqrt(lo * hi)
    tol = 1e-9 * (1.0 + abs(y))
    for _ in range(40):
        r = big_F(nl, x) - y
        if abs(r) <= tol:
            return x
        step = r * float(nl._f(np.asarray(x)))
        xn = x - step
        if not (lo * 0.5 <= xn <= hi * 2.0) or xn <= 0.0:
            xn = 0.5 * (lo + hi)
        if r > 0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        x = xn
    raise NumericError(
        f"growth clock inversion stalled at x={x!r} (target {y!r}); "
        "residual above tolerance"
    )


def ell_eval(nl: Nonlinearity, x):
    """Slowly varying companion ell(x) = (f(x)/x**beta)**(1/(1-beta))."""
    arr = _as_positive_array("ell_eval", x)
    b = nl.index
    out = (nl._f(arr) / arr ** b) ** (1.0 / (1.0 - b))
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def asymptotic_F_inverse(nl: Nonlinearity, y):
    """Quadrature-free inverse of the growth clock.

    (1-beta)**p * ell(y**p) * y**p with p = 1/(1-beta); asymptotically
    equivalent to big_F_inverse when the self-neglecting ratio holds.
    """
    arr = _as_positive_array("asymptotic_F_inverse", y)
    b = nl.index
    p = 1.0 / (1.0 - b)
    out = (1.0 - b) ** p * ell_eval(nl, arr ** p) * arr ** p
    return float(out) if np.isscalar(y) or arr.ndim == 0 else out


def debruijn_ratio(nl: Nonlinearity, x):
    """Self-neglecting ratio ell(x * ell(x)) / ell(x).

    Values near 1 on a grid certify that asymptotic_F_inverse applies.
    """
    arr = _as_positive_array("debruijn_ratio", x)
    l = ell_eval(nl, arr)
    out = ell_eval(nl, arr * l) / l
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def index_self_check(nl: Nonlinearity, xs=_SELF_CHECK_GRID) -> np.ndarray:
    """Measured doubling ratios f(2x)/f(x); should approach 2**beta."""
    pts = np.asarray(xs, dtype=float)
    return f_eval(nl, 2.0 * pts) / f_eval(nl, pts)


def check_index(nl: Nonlinearity) -> None:
    """Raise unless the measured ratio at the top of the grid is within 10%."""
    ratios = index_self_check(nl)
    target = 2.0 ** nl.index
    dev = abs(ratios[-1] / target - 1.0)
    if dev > _SELF_CHECK_TOL:
        raise DomainError(
            f"declared index {nl.index} inconsistent with sampled doubling "
            f"ratio {ratios[-1]:.4f} (expected ~{target:.4f})"
        )
