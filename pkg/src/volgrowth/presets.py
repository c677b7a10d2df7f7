"""Named scenario documents for the experiment runner.

Each preset is a plain JSON-able document consumed by
``cli.parse_scenario``, so loading one exercises the same validation
path as a user-supplied config file.  Check tolerances bundled with a
preset are engineering choices at desk scale: limits are asymptotic,
so every check is either an exact identity, an oracle value, or a
shrinking-trend requirement.
"""

from __future__ import annotations

import copy

_PRESETS: dict[str, dict] = {}
_DESCRIPTIONS: dict[str, str] = {}


def _register(doc: dict, description: str) -> None:
    _PRESETS[doc["name"]] = doc
    _DESCRIPTIONS[doc["name"]] = description


_register(
    {
        "name": "unperturbed-power",
        "equation": "volterra",
        "nonlinearity": {"kind": "pure-power", "a": 1.0, "beta": 0.5},
        "kernel": {"kind": "power", "theta": 1.0},
        "forcing": {"kind": "none"},
        "xi": 1.0,
        "step": 0.05,
        "t_max": 400.0,
        "checkpoints": [50.0, 100.0, 200.0, 400.0],
        "checks": [
            {"type": "final_rel", "series": "D2", "tol": 0.15},
            {"type": "trend", "series": "D2"},
            {"type": "trend", "series": "D3"},
        ],
    },
    "square-root growth against a linear-in-t kernel mass",
)

_register(
    {
        "name": "unperturbed-loglog",
        "equation": "volterra",
        "nonlinearity": {"kind": "power-loglog", "a": 1.0, "beta": 0.3,
                          "alpha": 1.0},
        "kernel": {"kind": "power", "theta": 1.0},
        "forcing": {"kind": "none"},
        "xi": 1.0,
        "step": 0.05,
        "t_max": 400.0,
        "checkpoints": [50.0, 100.0, 200.0, 400.0],
        "checks": [
            {"type": "trend", "series": "D2"},
            {"type": "final_rel", "series": "D2", "tol": 0.5},
        ],
    },
    "iterated-log modulated nonlinearity; slow convergence regime",
)

_register(
    {
        "name": "unperturbed-sinloglog",
        "equation": "volterra",
        "nonlinearity": {"kind": "power-sin-loglog", "beta": 0.5},
        "kernel": {"kind": "power", "theta": 1.0},
        "forcing": {"kind": "none"},
        "xi": 1.0,
        "step": 0.05,
        "t_max": 400.0,
        "checkpoints": [50.0, 100.0, 200.0, 400.0],
        "checks": [
            {"type": "final_rel", "series": "D2", "tol": 0.5},
        ],
    },
    "bounded oscillating slowly varying factor inside the nonlinearity",
)

_register(
    {
        "name": "discrete-paper-weights",
        "equation": "volterra",
        "nonlinearity": {"kind": "pure-power", "a": 1.0, "beta": 0.5},
        "kernel": {"kind": "comb", "lag": 1.0, "weights": "paper-log",
                    "theta": 0.5},
        "forcing": {"kind": "none"},
        "xi": 1.0,
        "step": 0.05,
        "t_max": 400.0,
        "checkpoints": [50.0, 100.0, 200.0, 400.0],
        "checks": [
            {"type": "trend", "series": "D1"},
            {"type": "final_rel", "series": "D1", "tol": 0.5},
        ],
    },
    "atom comb with log-power weights; delay-differential integration",
)

_register(
    {
        "name": "perturbed-lambda1",
        "equation": "volterra",
        "nonlinearity": {"kind": "pure-power", "a": 1.0, "beta": 0.5},
        "kernel": {"kind": "power", "theta": 1.0},
        "forcing": {"kind": "scaled-finv", "lam0": 1.0},
        "xi": 1.0,
        "step": 0.05,
        "t_max": 400.0,
        "checkpoints": [50.0, 100.0, 200.0, 400.0],
        "checks": [
            {"type": "classification", "expect": "lambda-finite"},
            {"type": "final_rel", "series": "D3", "tol": 0.15},
            {"type": "trend", "series": "D3"},
        ],
    },
    "forcing matched to the natural growth scale; characteristic rate",
)

_register(
    {
        "name": "bigpert-exp",
        "equation": "volterra",
        "nonlinearity": {"kind": "pure-power", "a": 1.0, "beta": 0.5},
        "kernel": {"kind": "power", "theta": 1.0},
        "forcing": {"kind": "power-exp", "alpha": 0.0, "gamma": 1.0},
        "xi": 1.0,
        "step": 0.005,
        "t_max": 30.0,
        "checkpoints": [3.75, 7.5, 15.0, 30.0],
        "checks": [
            {"type": "classification", "expect": "forcing-dominates"},
            {"type": "final_abs", "series": "D4", "target": 1.0, "tol": 0.02},
            {"type": "r2_final", "max": 1e-3},
        ],
    },
    "exponential forcing dominates; solution tracks it",
)

_register(
    {
        "name": "bigpert-oscpower",
        "equation": "volterra",
        "nonlinearity": {"kind": "pure-power", "a": 1.0, "beta": 0.5},
        "kernel": {"kind": "power", "theta": 1.0},
        "forcing": {"kind": "osc-power", "alpha": 8.0},
        "xi": 1.0,
        "step": 0.05,
        "t_max": 200.0,
        "checkpoints": [25.0, 50.0, 100.0, 200.0],
        "checks": [
            {"type": "final_abs", "series": "D4", "target": 1.0, "tol": 0.05},
        ],
    },
    "non-monotone power forcing still dominates despite oscillation",
)

_register(
    {
        "name": "illbehaved-oscexp",
        "equation": "volterra",
        "nonlinearity": {"kind": "pure-power", "a": 1.0, "beta": 0.5},
        "kernel": {"kind": "power", "theta": 1.0},
        "forcing": {"kind": "osc-exp", "alpha": 0.9},
        "xi": 1.0,
        "step": 0.005,
        "t_max": 40.0,
        "checkpoints": [5.0, 10.0, 20.0, 40.0],
        "checks": [
            {"type": "classification", "expect": "ill-behaved/unclassified"},
            {"type": "osc_ratio", "t_lo": 20.0, "t_hi": 40.0, "min": 10.0},
        ],
    },
    "periodic exponential-order fluctuation defeats classification",
)

_register(
    {
        "name": "ode-identity",
        "equation": "ode",
        "nonlinearity": {"kind": "pure-power", "a": 1.0, "beta": 0.5},
        "kernel": {"kind": "power", "theta": 1.0},
        "forcing": {"kind": "none"},
        "xi": 1.0,
        "step": 0.05,
        "t_max": 100.0,
        "checkpoints": [12.5, 25.0, 50.0, 100.0],
        "checks": [
            {"type": "identity_residual", "tol": 1e-2},
        ],
    },
    "comparison equation; growth clock identity holds exactly",
)

_register(
    {
        "name": "dirac-at-zero",
        "equation": "volterra",
        "nonlinearity": {"kind": "pure-power", "a": 1.0, "beta": 0.5},
        "kernel": {"kind": "constant", "mass": 1.0},
        "forcing": {"kind": "none"},
        "xi": 1.0,
        "step": 0.05,
        "t_max": 100.0,
        "checkpoints": [12.5, 25.0, 50.0, 100.0],
        "checks": [
            {"type": "final_abs", "series": "D1", "target": 1.0, "tol": 1e-3},
        ],
    },
    "all mass at zero: reduces to the memoryless equation (implicit step)",
)


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset_document(name: str) -> dict:
    try:
        return copy.deepcopy(_PRESETS[name])
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; choose from {', '.join(preset_names())}"
        ) from None


def preset_description(name: str) -> str:
    return _DESCRIPTIONS[name]
