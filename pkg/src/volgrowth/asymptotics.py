"""Theory-side rate predictions and trajectory diagnostics.

The unperturbed equation grows so that F(x(t)) ~ C2 * t * M(t) with
C2 = growth_constant(beta, theta), equivalently x(t) ~ L * F^{-1}(t M(t))
with L = C2**(1/(1-beta)).  A perturbation H with
H(t)/F^{-1}(t M(t)) -> lam shifts the rate to the root zeta of

    zeta = C2 * zeta**beta + lam,

a contraction fixed point on [L, C*].  Perturbations large enough that
M(t) * integral_0^t f(H) / H -> 0 instead drag the solution onto H
itself.  The classifier estimates which regime a forcing term is in
from finite-horizon ratio series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, NumericError
from .measure import KernelMeasure, capital_m, m_bar
from .regvar import Nonlinearity, big_F, big_F_inverse, f_eval
from .solver import Forcing, Trajectory
from .specfun import growth_constant, lambda_limit

# classifier thresholds (surfaced in reports)
STABLE_REL_CHANGE = 0.02   # R1 dyadic stabilization
SMALL_R2 = 0.05            # R2 smallness for forcing-dominates
OSC_RATIO = 10.0           # R2 max/min over the last decade
ZERO_LAMBDA = 0.01         # R1 this small and falling means lam = 0

CLASS_UNPERTURBED = "unperturbed"
CLASS_LAMBDA_FINITE = "lambda-finite"
CLASS_FORCING_DOMINATES = "forcing-dominates"
CLASS_UNCLASSIFIED = "ill-behaved/unclassified"


@dataclass(frozen=True)
class AsymptoticPrediction:
    beta: float
    theta: float
    lambda_limit: float
    growth_constant: float
    lower: float                      # L: unperturbed x / F^{-1}(t M) limit
    upper: float | None = None        # U: only bounded when lam is known
    forcing_lambda: float | None = None
    zeta: float | None = None
    classification: str = CLASS_UNPERTURBED

    @property
    def d3_target(self) -> float:
        return self.zeta if self.zeta is not None else self.lower


def characteristic_upper(beta: float, lower: float, lam: float) -> float:
    """U = (lam / L**beta + 1/(1-beta))**(1/(1-beta))."""
    return (lam / lower ** beta + 1.0 / (1.0 - beta)) ** (1.0 / (1.0 - beta))


def solve_characteristic(beta: float, theta: float, lam: float) -> float:
    """Unique root of zeta = C2 * zeta**beta + lam on [L, C*].

    Iterated from max(L, lam); the map contracts with factor <= beta on
    [L, inf) so convergence to 1e-14 needs O(log(1e-16)/log(beta)) steps.
    For beta = 0 the equation is linear and solved directly.
    """
    if not (lam >= 0.0 and math.isfinite(lam)):
        raise DomainError(f"forcing ratio must be >= 0, got {lam!r}")
    c2 = growth_constant(beta, theta)
    if beta == 0.0:
        return c2 + lam
    lower = c2 ** (1.0 / (1.0 - beta))
    max_iter = math.ceil(math.log(1e-16) / math.log(max(beta, 0.01))) + 5
    z = max(lower, lam)
    for _ in range(max_iter):
        z_next = c2 * z ** beta + lam
        if abs(z_next - z) <= 1e-14 * (1.0 + abs(z)):
            return z_next
        z = z_next
    raise NumericError("characteristic iteration did not converge")


def predict(beta: float, theta: float, forcing_lambda: float | None = None
            ) -> AsymptoticPrediction:
    """Rate constants for the given indices, with the perturbed rate when
    the forcing ratio is supplied."""
    lam_lim = lambda_limit(beta, theta)
    c2 = growth_constant(beta, theta)
    lower = c2 ** (1.0 / (1.0 - beta))
    if forcing_lambda is None:
        return AsymptoticPrediction(
            beta=beta, theta=theta, lambda_limit=lam_lim,
            growth_constant=c2, lower=lower,
        )
    lam = float(forcing_lambda)
    if not (lam >= 0.0 and math.isfinite(lam)):
        raise DomainError(f"forcing ratio must be >= 0, got {lam!r}")
    zeta = solve_characteristic(beta, theta, lam)
    return AsymptoticPrediction(
        beta=beta, theta=theta, lambda_limit=lam_lim, growth_constant=c2,
        lower=lower, upper=characteristic_upper(beta, lower, lam),
        forcing_lambda=lam, zeta=zeta, classification=CLASS_LAMBDA_FINITE,
    )


# ---------------------------------------------------------------------------
# forcing classification


@dataclass(frozen=True)
class ForcingClassification:
    classification: str
    lambda_estimate: float | None
    r1_times: np.ndarray          # dyadic probe times
    r1_values: np.ndarray         # H / F^{-1}(t M(t))
    r2_times: np.ndarray          # uniform probe grid (t > 0)
    r2_values: np.ndarray         # M(t) * integral f(H) / H(t)
    osc_ratio: float              # max/min of R2 over the last decade
    truncated: bool = False


def _dyadic_times(t_max: float, k: int = 5) -> np.ndarray:
    return t_max / 2.0 ** np.arange(k - 1, -1, -1)


def classify_forcing(nl: Nonlinearity, km: KernelMeasure, fc: Forcing,
                     t_max: float, probe_points: int | None = None
                     ) -> ForcingClassification:
    """Decide which growth regime a forcing term falls in.

    R1(t) = H/F^{-1}(t M) stabilizing (relative change below
    ``STABLE_REL_CHANGE`` over the last dyadic step) gives lambda-finite
    with the last value as the estimate; R2(t) = M(t) int_0^t f(H)/H
    decreasing through ``SMALL_R2`` gives forcing-dominates; an R2
    max/min spread beyond ``OSC_RATIO`` over the last decade flags the
    forcing as ill-behaved.  The inner integral is a cumulative
    trapezoid on the probe grid (H may oscillate; a fixed fine grid is
    predictable where adaptive quadrature is not).
    """
    if fc is None:
        raise DomainError("classify_forcing needs a non-trivial forcing term")
    if probe_points is None:
        probe_points = int(min(200_001, max(8192, round(t_max / 0.005))))
    ts = np.linspace(0.0, t_max, probe_points)
    with np.errstate(over="ignore"):
        h_vals = np.asarray(fc.H(ts), dtype=float)

    truncated = False
    finite = np.isfinite(h_vals)
    if not np.all(finite):
        last = int(np.argmin(finite))
        if last < 16:
            raise NumericError("forcing overflows too early to classify")
        ts, h_vals = ts[:last], h_vals[:last]
        truncated = True

    f_of_h = np.empty_like(h_vals)
    f_of_h[0] = 0.0 if h_vals[0] == 0.0 else f_eval(nl, h_vals[0])
    f_of_h[1:] = f_eval(nl, h_vals[1:])
    dt = ts[1] - ts[0]
    cum = np.concatenate(([0.0], np.cumsum(0.5 * dt * (f_of_h[1:] + f_of_h[:-1]))))
    m_vals = capital_m(km, ts)
    r2 = m_vals[1:] * cum[1:] / h_vals[1:]
    r2_times = ts[1:]

    horizon = ts[-1]
    r1_times = _dyadic_times(horizon)
    r1 = np.array([
        float(fc.H(t)) / big_F_inverse(nl, t * capital_m(km, t))
        for t in r1_times
    ])

    window = r2_times >= horizon / 10.0
    w_vals = r2[window]
    osc_ratio = float(np.max(w_vals) / np.min(w_vals)) if np.any(w_vals > 0) else math.inf

    # dyadic subsamples of R2 for the monotone-decrease decision
    r2_dyadic = np.interp(r1_times, r2_times, r2)

    stabilized = abs(r1[-1] / r1[-2] - 1.0) < STABLE_REL_CHANGE if r1[-2] != 0 else False
    r2_decreasing = bool(np.all(np.diff(r2_dyadic) < 0.0))
    r1_decreasing = bool(np.all(np.diff(r1) < 0.0))

    if stabilized:
        label, lam = CLASS_LAMBDA_FINITE, float(r1[-1])
    elif r2_decreasing and r2[-1] < SMALL_R2:
        label, lam = CLASS_FORCING_DOMINATES, None
    elif osc_ratio > OSC_RATIO:
        label, lam = CLASS_UNCLASSIFIED, None
    elif r1_decreasing and r1[-1] < ZERO_LAMBDA:
        label, lam = CLASS_LAMBDA_FINITE, 0.0
    else:
        label, lam = CLASS_UNCLASSIFIED, None

    return ForcingClassification(
        classification=label, lambda_estimate=lam,
        r1_times=r1_times, r1_values=r1,
        r2_times=r2_times, r2_values=r2,
        osc_ratio=osc_ratio, truncated=truncated,
    )


# ---------------------------------------------------------------------------
# convolution ratio (regular-variation Beta identity)


def convolution_ratio(rho: float, sigma: float, a, b, t: float) -> float:
    """integral_0^t a(s) b(t-s) ds / (t a(t) b(t)).

    For a, b regularly varying with indices rho, sigma >= 0 this tends
    to B(rho+1, sigma+1); for pure powers it equals the limit at every t.
    The index arguments document the caller's claim and scale-check the
    inputs; the quadrature itself is adaptive to 1e-8 relative.
    """
    if not (t > 0.0 and math.isfinite(t)):
        raise DomainError(f"convolution_ratio needs t > 0, got {t!r}")
    if rho < 0.0 or sigma < 0.0:
        raise DomainError("regular-variation indices must be >= 0")
    denom = t * float(a(t)) * float(b(t))
    if not (denom > 0.0 and math.isfinite(denom)):
        raise DomainError("a and b must be positive at t")
    val, err = quad(lambda s: float(a(s)) * float(b(t - s)), 0.0, t,
                    limit=200, epsabs=0.0, epsrel=1e-10)
    if not math.isfinite(val) or (val != 0.0 and err / abs(val) > 1e-8):
        raise NumericError(
            f"convolution quadrature error {err:.2e} above tolerance"
        )
    return val / denom


# ---------------------------------------------------------------------------
# trajectory diagnostics


@dataclass(frozen=True)
class DiagnosticSeries:
    """Checkpointed ratio series with their theoretical targets.

    d1 = F(x)/Mbar, d2 = F(x)/(t M), d3 = x/F^{-1}(t M), d4 = x/H (when
    forcing is present).  A trend flag records whether |D/target - 1|
    shrank at every consecutive checkpoint pair.
    """

    times: np.ndarray
    x: np.ndarray
    f_x: np.ndarray
    m_t: np.ndarray
    mbar_t: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray | None
    targets: dict
    trends: dict
    degraded: bool = False


def _trend(series: np.ndarray, target: float) -> bool:
    devs = np.abs(series / target - 1.0)
    return bool(np.all(np.diff(devs) < 0.0))


def diagnostics(traj: Trajectory, nl: Nonlinearity, km: KernelMeasure,
                fc: Forcing | None, pred: AsymptoticPrediction,
                checkpoints=None) -> DiagnosticSeries:
    """Evaluate the four convergence ratios at checkpoint times."""
    if checkpoints is None:
        checkpoints = traj.config.checkpoints
    usable = []
    for t in checkpoints:
        if t <= 0.0:
            continue
        try:
            idx = traj.index_of(t)
        except DomainError:
            continue
        if idx < traj.n_valid:
            usable.append(t)
    degraded = len(usable) < len([t for t in checkpoints if t > 0.0])
    if len(usable) < 3:
        degraded = True
    ts = np.asarray(usable, dtype=float)
    x = np.array([traj.value_at(t) for t in ts])
    f_x = np.array([big_F(nl, v) for v in x])
    m_t = np.array([capital_m(km, t) for t in ts])
    mbar_t = np.array([m_bar(km, t) for t in ts])
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = f_x / mbar_t
        d2 = f_x / (ts * m_t)
        d3 = x / np.array([big_F_inverse(nl, t * m) for t, m in zip(ts, m_t)])
    d4 = None
    if fc is not None:
        h_vals = np.asarray(fc.H(ts), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            d4 = x / h_vals

    targets = {
        "D1": pred.lambda_limit,
        "D2": pred.growth_constant,
        "D3": pred.d3_target,
        "D4": 1.0 if d4 is not None else None,
    }
    trends = {
        "D1": _trend(d1, targets["D1"]) if len(ts) >= 2 else None,
        "D2": _trend(d2, targets["D2"]) if len(ts) >= 2 else None,
        "D3": _trend(d3, targets["D3"]) if len(ts) >= 2 else None,
        "D4": (_trend(d4, 1.0) if (d4 is not None and len(ts) >= 2) else None),
    }
    return DiagnosticSeries(
        times=ts, x=x, f_x=f_x, m_t=m_t, mbar_t=mbar_t,
        d1=d1, d2=d2, d3=d3, d4=d4,
        targets=targets, trends=trends, degraded=degraded,
    )
