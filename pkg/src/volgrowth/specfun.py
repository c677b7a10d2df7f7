"""Self-contained real special functions and the growth-rate constants.

Everything here is a pure function of its arguments.  The log-Gamma
core is a Lanczos approximation (g = 7, nine coefficients) with the
reflection formula below 1/2; all Gamma ratios are assembled in the log
domain so that arguments like (1 + theta)/(1 - beta) > 170 never
overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)

# psi(x) = ln x - 1/(2x) - sum B_{2n} / (2n x^{2n}); coefficients of x^{-2n}
_PSI_TAIL = (
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32760.0,
)
_PSI_LIFT = 10.0


def _require_positive(name: str, x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} requires a positive finite argument, got {x!r}")
    return x


def ln_gamma(x: float) -> float:
    """Natural log of the Gamma function for real x > 0."""
    x = _require_positive("ln_gamma", x)
    if x < 0.5:
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return math.log(math.pi / math.sin(math.pi * x)) - ln_gamma(1.0 - x)
    z = x - 1.0
    acc = _LANCZOS[0]
    for k in range(1, len(_LANCZOS)):
        acc += _LANCZOS[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_TWO_PI + (z + 0.5) * math.log(t) - t + math.log(acc)


def beta_fn(x: float, y: float) -> float:
    """Euler Beta function B(x, y) for x, y > 0, via log-Gamma."""
    x = _require_positive("beta_fn", x)
    y = _require_positive("beta_fn", y)
    return math.exp(ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y))


def digamma(x: float) -> float:
    """Logarithmic derivative of Gamma for real x > 0.

    Uses the ascending recurrence to lift the argument above 10, then
    the asymptotic (Bernoulli) series.
    """
    x = _require_positive("digamma", x)
    acc = 0.0
    while x < _PSI_LIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    p = inv2
    for c in _PSI_TAIL:
        tail += c * p
        p *= inv2
    return acc + math.log(x) - 0.5 / x + tail


def _check_indices(beta: float, theta: float) -> tuple[float, float]:
    beta = float(beta)
    theta = float(theta)
    if not (math.isfinite(beta) and 0.0 <= beta < 1.0):
        raise DomainError(f"nonlinearity index must lie in [0, 1), got {beta!r}")
    if not (math.isfinite(theta) and theta >= 0.0):
        raise DomainError(f"kernel index must be >= 0, got {theta!r}")
    return beta, theta


def lambda_limit(beta: float, theta: float) -> float:
    """Limiting ratio of the growth clock F(x(t)) to the doubly integrated kernel.

    Equals Gamma(theta+1) Gamma((1+beta*theta)/(1-beta)) / Gamma((1+theta)/(1-beta)),
    evaluated in the log domain.  It is 1 exactly when beta = 0 or theta = 0
    and decays superexponentially in theta.
    """
    beta, theta = _check_indices(beta, theta)
    lg = (
        ln_gamma(theta + 1.0)
        + ln_gamma((1.0 + beta * theta) / (1.0 - beta))
        - ln_gamma((1.0 + theta) / (1.0 - beta))
    )
    return math.exp(lg)


def growth_constant(beta: float, theta: float) -> float:
    """Limiting ratio of F(x(t)) to t*M(t): B(1+theta, (1+theta*beta)/(1-beta)) / (1-beta).

    Identical to ``lambda_limit(beta, theta) / (1 + theta)``; computing it
    through the Beta function keeps an independent arithmetic path.
    """
    beta, theta = _check_indices(beta, theta)
    b = beta_fn(1.0 + theta, (1.0 + theta * beta) / (1.0 - beta))
    return b / (1.0 - beta)


@dataclass(frozen=True)
class RateConstants:
    """Indices and the two dimensionless rate constants they determine."""

    beta: float
    theta: float
    lambda_limit: float
    growth_constant: float


def rate_constants(beta: float, theta: float) -> RateConstants:
    beta, theta = _check_indices(beta, theta)
    return RateConstants(
        beta=beta,
        theta=theta,
        lambda_limit=lambda_limit(beta, theta),
        growth_constant=growth_constant(beta, theta),
    )
