"""Fixed-step second-order integrators for the memory-growth equation.

The integral form

    x(t) = xi + integral_0^t M(t - s) f(x(s)) ds + H(t)

is discretized with the product-trapezoidal rule on a uniform grid.  An
atom of the measure at zero makes each step implicit through the weight
h/2 * M(0) * f(x_n), solved by damped fixed-point iteration; all growth
presets have M(0) = 0 and step explicitly.  Atom combs are integrated
in their delay-differential form with a two-stage predictor-corrector
over stored lagged grid values, and the comparison equation
y' = M(t) f(y) uses the implicit trapezoidal rule on the same grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .measure import DiscreteComb, KernelMeasure, Mixed, capital_m
from .regvar import Nonlinearity, big_F_inverse, f_eval

N_MAX = 200_000

STATUS_COMPLETED = "completed"
STATUS_TRUNCATED = "truncated-overflow"


# ---------------------------------------------------------------------------
# forcing families


class Forcing:
    """Cumulative perturbation H with H(0) = 0 and H > 0 on (0, inf)."""

    def H(self, t):
        raise NotImplementedError

    def deriv(self, t: float) -> float:
        """dH/dt; default is a second-order finite difference."""
        d = 1e-5 * max(1.0, abs(t))
        if t < d:
            return float(
                (-3.0 * self.H(t) + 4.0 * self.H(t + d) - self.H(t + 2 * d))
                / (2.0 * d)
            )
        return float((self.H(t + d) - self.H(t - d)) / (2.0 * d))

    def _check_positive(self):
        ts = np.logspace(-3, 2, 24)
        vals = np.asarray(self.H(ts), dtype=float)
        if np.any(vals <= 0.0):
            raise DomainError(
                f"{type(self).__name__}: H must be positive for t > 0"
            )
        h0 = float(self.H(0.0))
        if abs(h0) > 1e-12:
            raise DomainError(f"{type(self).__name__}: H(0) must be 0, got {h0!r}")


@dataclass(frozen=True)
class PowerExp(Forcing):
    """H(t) = (1 + t)**alpha * exp(gamma t) - 1."""

    alpha: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.gamma < 0.0:
            raise DomainError("exponential rate must be >= 0")
        self._check_positive()

    def H(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 + t) ** self.alpha * np.exp(self.gamma * t) - 1.0

    def deriv(self, t):
        g = self.alpha / (1.0 + t) + self.gamma
        return float(g * (1.0 + t) ** self.alpha * math.exp(self.gamma * t))


@dataclass(frozen=True)
class ScaledFinv(Forcing):
    """H(t) = lam0 * (F^{-1}(t M(t)) - 1): tuned to the natural growth scale."""

    lam0: float
    nl: Nonlinearity
    km: KernelMeasure

    def __post_init__(self):
        if not (self.lam0 > 0.0 and math.isfinite(self.lam0)):
            raise DomainError("forcing scale must be positive")

    def H(self, t):
        t = np.asarray(t, dtype=float)
        u = t * capital_m(self.km, t)
        from .regvar import PurePower

        if isinstance(self.nl, PurePower):
            b = self.nl.index
            inv = (1.0 + self.nl.a * (1.0 - b) * u) ** (1.0 / (1.0 - b))
        elif u.ndim == 0:
            inv = big_F_inverse(self.nl, float(u))
        else:
            inv = np.array([big_F_inverse(self.nl, v) for v in u.ravel()])
            inv = inv.reshape(u.shape)
        return self.lam0 * (inv - 1.0)


@dataclass(frozen=True)
class OscPower(Forcing):
    """H(t) = (1 + t)**alpha * (2 + sin t) - 2: non-monotone power growth."""

    alpha: float

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise DomainError("oscillating power forcing needs alpha > 0")
        self._check_positive()

    def H(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 + t) ** self.alpha * (2.0 + np.sin(t)) - 2.0

    def deriv(self, t):
        p = (1.0 + t) ** self.alpha
        return float(
            self.alpha * p / (1.0 + t) * (2.0 + math.sin(t)) + p * math.cos(t)
        )


def sin_squared_profile(t):
    """1-periodic profile 2 sin^2(pi t) - 1, spanning exactly [-1, 1]."""
    return 2.0 * np.sin(np.pi * np.asarray(t, dtype=float)) ** 2 - 1.0


@dataclass(frozen=True)
class OscExp(Forcing):
    """H(t) = exp(t (1 + alpha p(t))) - 1 with a 1-periodic profile p.

    For alpha in (0, 1) the exponent rate sweeps [1-alpha, 1+alpha] each
    period, producing exponential-order fluctuation.
    """

    alpha: float
    profile: object = sin_squared_profile

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("oscillating exponent needs alpha in (0, 1)")
        self._check_positive()

    def H(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(t * (1.0 + self.alpha * self.profile(t))) - 1.0


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class SolverConfig:
    step: float = 0.05
    t_max: float = 400.0
    implicit_tol: float = 1e-12
    implicit_max_iter: int = 50
    checkpoints: tuple[float, ...] = ()
    overflow_cap: float = 1e300

    def __post_init__(self):
        if not (self.step > 0.0 and math.isfinite(self.step)):
            raise DomainError(f"step must be positive, got {self.step!r}")
        if not (self.t_max > 0.0 and math.isfinite(self.t_max)):
            raise DomainError(f"t_max must be positive, got {self.t_max!r}")
        n = self.t_max / self.step
        if abs(n - round(n)) > 1e-9:
            raise DomainError("t_max must be an integer number of steps")
        if round(n) > N_MAX:
            raise DomainError(f"grid of {round(n)} steps exceeds the {N_MAX} cap")
        for c in self.checkpoints:
            if not (0.0 < c <= self.t_max):
                raise DomainError(f"checkpoint {c!r} outside (0, t_max]")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.step))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    status: str
    config: SolverConfig
    truncated_at: int | None = None

    @property
    def n_valid(self) -> int:
        return self.truncated_at if self.truncated_at is not None else len(self.times)

    def index_of(self, t: float) -> int:
        idx = int(round(t / self.config.step))
        if abs(idx * self.config.step - t) > 1e-9 * max(1.0, t):
            raise DomainError(f"time {t!r} is not a grid point")
        if not 0 <= idx < len(self.times):
            raise DomainError(f"time {t!r} outside the solved horizon")
        return idx

    def value_at(self, t: float) -> float:
        idx = self.index_of(t)
        if idx >= self.n_valid:
            raise DomainError(f"trajectory truncated before t={t!r}")
        return float(self.values[idx])


# ---------------------------------------------------------------------------
# implicit scalar step


def _fixed_point(base, coeff, f, start, tol, max_iter):
    """Solve z = base + coeff * f(z) by (damped) fixed-point iteration."""
    z = start
    omega = 1.0
    last = math.inf
    for _ in range(4 * max_iter):
        g = base + coeff * float(f(z))
        r = abs(g - z)
        if r <= tol * (1.0 + abs(z)):
            return g
        if r >= last:
            omega = 0.5 * omega
            if omega < 1e-3:
                break
        last = r
        z = z + omega * (g - z)
    raise NumericError(
        "implicit step failed to converge; reduce the time step"
    )


def _validate_inputs(nl, km, xi, cfg):
    if not (xi > 0.0 and math.isfinite(xi)):
        raise DomainError(f"initial value must be positive, got {xi!r}")
    if math.isfinite(km.horizon) and km.horizon < cfg.t_max - 1e-9:
        raise DomainError(
            f"kernel horizon {km.horizon} shorter than t_max {cfg.t_max}"
        )


# ---------------------------------------------------------------------------
# main solver


def solve_volterra(nl, km, fc, xi, cfg: SolverConfig) -> Trajectory:
    """March the integral equation x = xi + (M * f(x)) + H on a uniform grid.

    Product-trapezoidal in the convolution, O(h^2) for smooth data.
    Values exceeding ``cfg.overflow_cap`` truncate the trajectory with a
    ``truncated-overflow`` status rather than raising.
    """
    _validate_inputs(nl, km, xi, cfg)
    if isinstance(km, DiscreteComb):
        return _solve_delay_form(nl, km, fc, xi, cfg)

    n = cfg.n_steps
    h = cfg.step
    times = np.arange(n + 1) * h
    if isinstance(km, Mixed):
        m_grid = km.continuous.grid_m(h, n)
        comb = km.atoms
    else:
        m_grid = np.asarray(km.grid_m(h, n), dtype=float)
        comb = None
    h_vals = np.zeros(n + 1) if fc is None else np.asarray(fc.H(times), dtype=float)

    x = np.full(n + 1, np.nan)
    f_vals = np.empty(n + 1)
    x[0] = xi
    f_vals[0] = f_eval(nl, xi)
    m_rev = m_grid[::-1].copy()
    atom0 = km.atom_at_zero
    coeff = 0.5 * h * atom0

    # comb part of a mixed kernel: sum_j w_j * integral_0^{t-j lag} f(x)
    if comb is not None:
        ratio = comb.lag / h
        if abs(ratio - round(ratio)) > 1e-9:
            raise DomainError("solver step must divide the comb lag exactly")
        lag_idx = int(round(ratio))
        j_max = int(cfg.t_max / comb.lag) + 1
        w = comb._weights(np.arange(j_max + 1))
        cum_f = np.zeros(n + 1)  # trapezoid of f(x) up to each grid point

    status = STATUS_COMPLETED
    truncated_at = None
    for i in range(1, n + 1):
        acc = 0.5 * m_grid[i] * f_vals[0]
        if i > 1:
            acc += float(np.dot(m_rev[n - i + 1 : n], f_vals[1:i]))
        base = xi + h_vals[i] + h * acc
        if comb is not None:
            if i >= 2:
                cum_f[i - 1] = cum_f[i - 2] + 0.5 * h * (f_vals[i - 2] + f_vals[i - 1])
            jn = min(i // lag_idx, j_max)
            lag_pts = i - np.arange(jn + 1) * lag_idx
            base += float(np.dot(w[1 : jn + 1], cum_f[lag_pts[1:]]))
            # the j = 0 atom sees cum_f[i], whose trapezoid tail holds
            # f(x_i); that half-weight is exactly the implicit coefficient
            base += w[0] * (cum_f[i - 1] + 0.5 * h * f_vals[i - 1])
        if coeff > 0.0:
            xi_n = _fixed_point(
                base, coeff, lambda z: f_eval(nl, z), x[i - 1],
                cfg.implicit_tol, cfg.implicit_max_iter,
            )
        else:
            xi_n = base
        if not math.isfinite(xi_n) or abs(xi_n) > cfg.overflow_cap:
            status = STATUS_TRUNCATED
            truncated_at = i
            break
        x[i] = xi_n
        f_vals[i] = f_eval(nl, xi_n)

    return Trajectory(times, x, status, cfg, truncated_at)


def _solve_delay_form(nl, km: DiscreteComb, fc, xi, cfg: SolverConfig) -> Trajectory:
    """Two-stage predictor-corrector on x' = sum_j w_j f(x(t - j lag)) + h(t)."""
    n = cfg.n_steps
    h = cfg.step
    ratio = km.lag / h
    if abs(ratio - round(ratio)) > 1e-9:
        raise DomainError("solver step must divide the comb lag exactly")
    lag_idx = int(round(ratio))
    j_max = int(cfg.t_max / km.lag) + 1
    w = km._weights(np.arange(j_max + 1))

    times = np.arange(n + 1) * h
    x = np.full(n + 1, np.nan)
    x[0] = xi
    hd = (lambda t: 0.0) if fc is None else fc.deriv

    def rhs(i, current):
        jn = min(i // lag_idx, j_max)
        idx = i - np.arange(jn + 1) * lag_idx
        vals = x[idx]
        vals[0] = current
        return float(np.dot(w[: jn + 1], f_eval(nl, vals))) + float(hd(times[i]))

    status = STATUS_COMPLETED
    truncated_at = None
    for i in range(n):
        k1 = rhs(i, x[i])
        pred = x[i] + h * k1
        if not math.isfinite(pred) or abs(pred) > cfg.overflow_cap:
            status = STATUS_TRUNCATED
            truncated_at = i + 1
            break
        if pred <= 0.0:
            raise NumericError(
                "predictor left the positive domain; reduce the time step"
            )
        k2 = rhs(i + 1, pred)
        nxt = x[i] + 0.5 * h * (k1 + k2)
        if not math.isfinite(nxt) or abs(nxt) > cfg.overflow_cap:
            status = STATUS_TRUNCATED
            truncated_at = i + 1
            break
        x[i + 1] = nxt

    return Trajectory(times, x, status, cfg, truncated_at)


def solve_comparison_ode(nl, km, xi, cfg: SolverConfig) -> Trajectory:
    """Implicit-trapezoidal march of y' = M(t) f(y) on the same grid.

    Along exact solutions F(y(t)) = F(xi) + Mbar(t) identically; the
    discrete solution satisfies it to O(h^2).
    """
    _validate_inputs(nl, km, xi, cfg)
    n = cfg.n_steps
    h = cfg.step
    times = np.arange(n + 1) * h
    m_grid = np.asarray(km.grid_m(h, n), dtype=float)

    y = np.full(n + 1, np.nan)
    y[0] = xi
    status = STATUS_COMPLETED
    truncated_at = None
    for i in range(n):
        k1 = m_grid[i] * f_eval(nl, y[i])
        base = y[i] + 0.5 * h * k1
        coeff = 0.5 * h * m_grid[i + 1]
        if coeff > 0.0:
            nxt = _fixed_point(
                base, coeff, lambda z: f_eval(nl, z), y[i] + h * k1,
                cfg.implicit_tol, cfg.implicit_max_iter,
            )
        else:
            nxt = base
        if not math.isfinite(nxt) or abs(nxt) > cfg.overflow_cap:
            status = STATUS_TRUNCATED
            truncated_at = i + 1
            break
        y[i + 1] = nxt

    return Trajectory(times, y, status, cfg, truncated_at)
