"""Scenario-driven experiment runner and command-line interface.

A scenario is a single JSON document naming one nonlinearity, one
kernel, an optional forcing term, and solver settings.  Running it
produces a checkpoint CSV (bit-stable: 17 significant digits, comma
separated, LF line endings) and a JSON summary whose pass/fail entries
are recomputable from the emitted numbers alone.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import asymptotics, measure, presets, regvar, solver
from .asymptotics import (
    CLASS_FORCING_DOMINATES,
    CLASS_LAMBDA_FINITE,
    CLASS_UNPERTURBED,
    AsymptoticPrediction,
    DiagnosticSeries,
    ForcingClassification,
    classify_forcing,
    convolution_ratio,
    diagnostics,
    predict,
)
from .errors import DomainError, NumericError, ScenarioError
from .measure import (
    AbsContinuous,
    DiscreteComb,
    DirectM,
    KernelMeasure,
    Mixed,
    constant_kernel,
    paper_log_weights,
    power_kernel,
    shifted_power_kernel,
)
from .regvar import (
    Nonlinearity,
    PowerLogLog,
    PowerSinLogLog,
    PurePower,
    UserTable,
    big_F,
)
from .solver import (
    Forcing,
    OscExp,
    OscPower,
    PowerExp,
    ScaledFinv,
    SolverConfig,
    Trajectory,
    solve_comparison_ode,
    solve_volterra,
)

CSV_HEADER = "t,x,F_x,M_t,Mbar_t,D1,D2,D3,D4"
_DEFAULT_CHECKPOINTS = (50.0, 100.0, 200.0, 400.0)

_SCENARIO_KEYS = {
    "name", "equation", "nonlinearity", "kernel", "forcing", "xi",
    "step", "t_max", "checkpoints", "checks", "predict", "out_dir",
}


# ---------------------------------------------------------------------------
# scenario documents


@dataclass(frozen=True)
class Scenario:
    name: str
    equation: str
    nonlinearity: Nonlinearity
    kernel: KernelMeasure
    forcing: Forcing | None
    xi: float
    config: SolverConfig
    checks: tuple[dict, ...]
    predict_enabled: bool = True
    out_dir: str | None = None


def _build_nonlinearity(spec: dict, problems: list[str]) -> Nonlinearity | None:
    kind = spec.get("kind")
    beta = spec.get("beta")
    try:
        if kind == "pure-power":
            return PurePower(a=spec.get("a", 1.0), index=beta)
        if kind == "power-loglog":
            kwargs = {}
            if "shift" in spec:
                kwargs["shift"] = spec["shift"]
            return PowerLogLog(a=spec.get("a", 1.0), index=beta,
                               alpha=spec.get("alpha", 1.0), **kwargs)
        if kind == "power-sin-loglog":
            kwargs = {}
            if "shift" in spec:
                kwargs["shift"] = spec["shift"]
            return PowerSinLogLog(index=beta, **kwargs)
        if kind == "table":
            return UserTable(x=tuple(spec["x"]), f=tuple(spec["f"]), index=beta)
    except (DomainError, TypeError, KeyError) as exc:
        problems.append(f"nonlinearity: {exc}")
        return None
    problems.append(f"nonlinearity: unknown kind {kind!r}")
    return None


def _build_kernel(spec: dict, horizon: float, step: float,
                  problems: list[str]) -> KernelMeasure | None:
    kind = spec.get("kind")
    theta = spec.get("theta", 0.0)
    try:
        if kind == "power":
            return power_kernel(theta, horizon=horizon)
        if kind == "shifted-power":
            return shifted_power_kernel(theta, horizon=horizon)
        if kind == "constant":
            return constant_kernel(spec.get("mass", 1.0), horizon=horizon)
        if kind == "zero":
            return constant_kernel(0.0, horizon=horizon)
        if kind == "density-shifted-power":
            th = float(theta)

            def density(s):
                return th * (1.0 + np.asarray(s, dtype=float)) ** (th - 1.0)

            return AbsContinuous(density, th, horizon=horizon)
        if kind == "comb":
            lag = float(spec.get("lag", 1.0))
            w = spec.get("weights", "constant")
            if w == "constant":
                scale = float(spec.get("scale", 1.0))
                rule = lambda s: np.full_like(np.asarray(s, dtype=float), scale)
                th = 1.0 if "theta" not in spec else float(theta)
            elif w == "paper-log":
                rule = paper_log_weights(float(theta))
                th = float(theta)
            else:
                problems.append(f"kernel: unknown comb weights {w!r}")
                return None
            ratio = lag / step
            if abs(ratio - round(ratio)) > 1e-9:
                problems.append(
                    f"kernel: comb lag {lag} is not an integer multiple of "
                    f"step {step}"
                )
                return None
            return DiscreteComb(lag, rule, th, horizon=horizon)
    except (DomainError, TypeError) as exc:
        problems.append(f"kernel: {exc}")
        return None
    problems.append(f"kernel: unknown kind {kind!r}")
    return None


def _build_forcing(spec: dict | None, nl, km,
                   problems: list[str]) -> Forcing | None:
    if spec is None:
        return None
    kind = spec.get("kind", "none")
    try:
        if kind == "none":
            return None
        if kind == "power-exp":
            return PowerExp(alpha=spec.get("alpha", 0.0),
                            gamma=spec.get("gamma", 0.0))
        if kind == "scaled-finv":
            return ScaledFinv(lam0=spec.get("lam0", 1.0), nl=nl, km=km)
        if kind == "osc-power":
            return OscPower(alpha=spec.get("alpha", 1.0))
        if kind == "osc-exp":
            return OscExp(alpha=spec.get("alpha", 0.5))
    except (DomainError, TypeError) as exc:
        problems.append(f"forcing: {exc}")
        return None
    problems.append(f"forcing: unknown kind {kind!r}")
    return None


def parse_scenario(document) -> Scenario:
    """Validate a scenario document (JSON text or dict) into a Scenario.

    Validation problems are aggregated: the raised ScenarioError lists
    every violation, not just the first.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"not valid JSON: {exc}"]) from None
    if not isinstance(document, dict):
        raise ScenarioError(["scenario document must be a JSON object"])

    problems: list[str] = []
    unknown = set(document) - _SCENARIO_KEYS
    for key in sorted(unknown):
        problems.append(f"unknown key {key!r}")

    name = document.get("name", "scenario")
    equation = document.get("equation", "volterra")
    if equation not in ("volterra", "ode"):
        problems.append(f"equation must be 'volterra' or 'ode', got {equation!r}")

    step = float(document.get("step", 0.05))
    t_max = float(document.get("t_max", 400.0))
    checkpoints = document.get("checkpoints")
    if checkpoints is None:
        checkpoints = [c for c in _DEFAULT_CHECKPOINTS if 0.0 < c <= t_max]
        if not checkpoints:
            checkpoints = [t_max / 8, t_max / 4, t_max / 2, t_max]
    try:
        cfg = SolverConfig(step=step, t_max=t_max,
                           checkpoints=tuple(float(c) for c in checkpoints))
    except DomainError as exc:
        problems.append(f"solver config: {exc}")
        cfg = None

    nl_spec = document.get("nonlinearity")
    nl = None
    if not isinstance(nl_spec, dict):
        problems.append("missing nonlinearity section")
    else:
        nl = _build_nonlinearity(nl_spec, problems)
        if nl is not None:
            try:
                regvar.check_index(nl)
            except DomainError as exc:
                problems.append(f"nonlinearity: {exc}")

    km_spec = document.get("kernel")
    km = None
    if not isinstance(km_spec, dict):
        problems.append("missing kernel section")
    else:
        km = _build_kernel(km_spec, t_max, step, problems)
        if km is not None:
            try:
                measure.check_index(km)
            except DomainError as exc:
                problems.append(f"kernel: {exc}")

    fc = None
    if nl is not None and km is not None:
        fc = _build_forcing(document.get("forcing"), nl, km, problems)

    xi = float(document.get("xi", 1.0))
    if not (xi > 0.0 and math.isfinite(xi)):
        problems.append(f"xi must be positive, got {xi!r}")

    checks = document.get("checks", [])
    if not isinstance(checks, list):
        problems.append("checks must be a list")
        checks = []

    if problems:
        raise ScenarioError(problems)

    return Scenario(
        name=name, equation=equation, nonlinearity=nl, kernel=km, forcing=fc,
        xi=xi, config=cfg, checks=tuple(checks),
        predict_enabled=bool(document.get("predict", True)),
        out_dir=document.get("out_dir"),
    )


def list_presets() -> list[tuple[str, str]]:
    """Preset names with one-line descriptions."""
    return [(n, presets.preset_description(n)) for n in presets.preset_names()]


def load_preset(name: str, *, t_max: float | None = None,
                step: float | None = None) -> Scenario:
    doc = presets.preset_document(name)
    if t_max is not None:
        doc["t_max"] = t_max
        doc["checkpoints"] = [t_max / 8, t_max / 4, t_max / 2, t_max]
    if step is not None:
        doc["step"] = step
    return parse_scenario(doc)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    scenario: Scenario
    prediction: AsymptoticPrediction | None
    series: DiagnosticSeries | None
    classification: ForcingClassification | None
    checks: list[dict]
    status: str
    extras: dict
    runtime_seconds: float
    csv_text: str = ""

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks) and self.status in (
            solver.STATUS_COMPLETED, solver.STATUS_TRUNCATED,
        )

    def summary_dict(self) -> dict:
        """Deterministic JSON summary (no wall-clock entries)."""
        pred = self.prediction
        ser = self.series

        def _final(arr):
            return float(arr[-1]) if arr is not None and len(arr) else None

        lam = pred.forcing_lambda if pred else None
        if lam is not None and math.isinf(lam):
            lam = "inf"
        out = {
            "scenario": self.scenario.name,
            "beta": self.scenario.nonlinearity.index,
            "theta": self.scenario.kernel.theta,
            "lambda": lam,
            "Lambda": pred.lambda_limit if pred else None,
            "C2": pred.growth_constant if pred else None,
            "L": pred.lower if pred else None,
            "U": pred.upper if pred else None,
            "zeta": pred.zeta if pred else None,
            "classification": pred.classification if pred else None,
            "final_D1": _final(ser.d1) if ser else None,
            "final_D2": _final(ser.d2) if ser else None,
            "final_D3": _final(ser.d3) if ser else None,
            "final_D4": _final(ser.d4) if ser else None,
            "trend_D1": ser.trends["D1"] if ser else None,
            "trend_D2": ser.trends["D2"] if ser else None,
            "trend_D3": ser.trends["D3"] if ser else None,
            "trend_D4": ser.trends["D4"] if ser else None,
            "status": self.status,
            "xi": self.scenario.xi,
            "F_xi": self.extras.get("F_xi"),
            "checks": self.checks,
            "run": {
                "step": self.scenario.config.step,
                "t_max": self.scenario.config.t_max,
                "n_steps": self.scenario.config.n_steps,
                "equation": self.scenario.equation,
            },
        }
        for key in ("max_identity_residual", "r2_final", "osc_ratio",
                    "lambda_estimate"):
            if key in self.extras:
                out[key] = self.extras[key]
        return out


def _fmt(v: float) -> str:
    return format(v, ".16e")


def render_csv(series: DiagnosticSeries) -> str:
    lines = [CSV_HEADER]
    n = len(series.times)
    for i in range(n):
        cells = [
            _fmt(series.times[i]), _fmt(series.x[i]), _fmt(series.f_x[i]),
            _fmt(series.m_t[i]), _fmt(series.mbar_t[i]), _fmt(series.d1[i]),
            _fmt(series.d2[i]), _fmt(series.d3[i]),
            _fmt(series.d4[i]) if series.d4 is not None else "",
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# declared checks


def _eval_check(check: dict, report_data: dict) -> dict:
    """Evaluate one declared check against numbers in the report."""
    ser: DiagnosticSeries = report_data["series"]
    pred: AsymptoticPrediction = report_data["prediction"]
    kind = check.get("type")
    result = {"check": dict(check), "passed": False, "value": None}

    def series_values(name):
        arr = {"D1": ser.d1, "D2": ser.d2, "D3": ser.d3, "D4": ser.d4}[name]
        if arr is None:
            raise DomainError(f"series {name} undefined for this scenario")
        return arr

    try:
        if kind in ("final_rel", "final_abs"):
            name = check["series"]
            vals = series_values(name)
            target = check.get("target")
            if target is None:
                target = ser.targets[name]
            final = float(vals[-1])
            dev = (abs(final / target - 1.0) if kind == "final_rel"
                   else abs(final - target))
            result["value"] = dev
            result["passed"] = bool(dev <= check["tol"])
        elif kind == "trend":
            name = check["series"]
            vals = series_values(name)
            target = check.get("target")
            if target is None:
                target = ser.targets[name]
            devs = np.abs(vals / target - 1.0)
            result["value"] = [float(d) for d in devs]
            result["passed"] = bool(np.all(np.diff(devs) < 0.0))
        elif kind == "identity_residual":
            result["value"] = report_data["extras"]["max_identity_residual"]
            result["passed"] = bool(result["value"] <= check["tol"])
        elif kind == "classification":
            cls = report_data["classification"]
            result["value"] = cls.classification if cls else None
            result["passed"] = bool(cls and cls.classification == check["expect"])
        elif kind == "r2_final":
            cls = report_data["classification"]
            result["value"] = float(cls.r2_values[-1]) if cls else None
            result["passed"] = bool(
                cls is not None and cls.r2_values[-1] <= check["max"]
            )
        elif kind == "osc_ratio":
            cls = report_data["classification"]
            if cls is not None:
                mask = (cls.r2_times >= check["t_lo"]) & (
                    cls.r2_times <= check["t_hi"])
                h_over_int = 1.0 / (cls.r2_values[mask] /
                                    np.interp(cls.r2_times[mask], cls.r2_times,
                                              np.maximum(cls.r2_times, 0) * 0 + 1))
                window = cls.r2_values[mask]
                ratio = float(np.max(window) / np.min(window))
                result["value"] = ratio
                result["passed"] = bool(ratio >= check["min"])
        elif kind == "zero_measure_identity":
            resid = report_data["extras"]["zero_measure_residual"]
            result["value"] = resid
            result["passed"] = bool(resid <= check.get("tol", 1e-9))
        else:
            result["error"] = f"unknown check type {kind!r}"
    except (KeyError, DomainError) as exc:
        result["error"] = str(exc)
    return result


def _identity_residual(traj: Trajectory, nl, km, xi) -> float:
    """max over the valid grid of |F(x_n) - F(xi) - Mbar(t_n)|."""
    n = traj.n_valid
    ts = traj.times[:n]
    vals = traj.values[:n]
    if isinstance(nl, PurePower):
        b = nl.index
        f_of = (vals ** (1.0 - b) - 1.0) / (nl.a * (1.0 - b))
    else:
        f_of = np.array([big_F(nl, v) for v in vals])
    mbar = measure.m_bar(km, ts)
    return float(np.max(np.abs(f_of - big_F(nl, xi) - mbar)))


def run_scenario(s: Scenario, out_dir: str | None = None) -> Report:
    """Solve, predict, diagnose, check, and serialize one scenario.

    Deterministic: the same scenario yields byte-identical CSV and JSON.
    Solver failures are captured in the report status rather than raised.
    """
    t0 = time.perf_counter()
    extras: dict = {}
    nl, km, fc, cfg = s.nonlinearity, s.kernel, s.forcing, s.config

    try:
        if s.equation == "ode":
            traj = solve_comparison_ode(nl, km, s.xi, cfg)
        else:
            traj = solve_volterra(nl, km, fc, s.xi, cfg)
        status = traj.status
    except (DomainError, NumericError) as exc:
        extras["error"] = str(exc)
        return Report(
            scenario=s, prediction=None, series=None, classification=None,
            checks=[{"check": dict(c), "passed": False,
                     "error": "solver failed"} for c in s.checks],
            status="failed", extras=extras,
            runtime_seconds=time.perf_counter() - t0,
        )

    classification = None
    pred = None
    if s.predict_enabled:
        if fc is None:
            pred = predict(nl.index, km.theta)
        else:
            classification = classify_forcing(nl, km, fc, cfg.t_max)
            extras["r2_final"] = float(classification.r2_values[-1])
            extras["osc_ratio"] = float(classification.osc_ratio)
            if (classification.classification == CLASS_LAMBDA_FINITE
                    and classification.lambda_estimate is not None):
                pred = predict(nl.index, km.theta,
                               classification.lambda_estimate)
                extras["lambda_estimate"] = classification.lambda_estimate
            else:
                pred = dataclasses.replace(
                    predict(nl.index, km.theta),
                    forcing_lambda=(math.inf if classification.classification
                                    == CLASS_FORCING_DOMINATES else None),
                    classification=classification.classification,
                )

    series = None
    if pred is not None:
        series = diagnostics(traj, nl, km, fc, pred)

    extras["F_xi"] = big_F(nl, s.xi)
    if s.equation == "ode" or any(
            c.get("type") == "identity_residual" for c in s.checks):
        extras["max_identity_residual"] = _identity_residual(traj, nl, km, s.xi)
    if any(c.get("type") == "zero_measure_identity" for c in s.checks):
        h_vals = (np.zeros(len(series.times)) if fc is None
                  else np.asarray(fc.H(series.times), dtype=float))
        extras["zero_measure_residual"] = float(
            np.max(np.abs(series.x - s.xi - h_vals)))

    report_data = {"series": series, "prediction": pred,
                   "classification": classification, "extras": extras}
    checks = [_eval_check(c, report_data) for c in s.checks]

    report = Report(
        scenario=s, prediction=pred, series=series,
        classification=classification, checks=checks, status=status,
        extras=extras, runtime_seconds=time.perf_counter() - t0,
        csv_text=render_csv(series) if series is not None else "",
    )

    target = out_dir or s.out_dir
    if target is not None:
        out = Path(target)
        out.mkdir(parents=True, exist_ok=True)
        if report.csv_text:
            (out / f"{s.name}.csv").write_bytes(report.csv_text.encode())
        payload = json.dumps(report.summary_dict(), indent=2, sort_keys=True)
        (out / f"{s.name}.json").write_bytes((payload + "\n").encode())
    return report


def run_batch(scenarios: list[Scenario], out_dir: str | None) -> list[Report]:
    """Run independent scenarios, optionally in parallel (VG_THREADS)."""
    workers = int(os.environ.get("VG_THREADS", os.cpu_count() or 1))
    workers = max(1, min(workers, len(scenarios)))
    if workers == 1:
        reports = [run_scenario(s, out_dir) for s in scenarios]
    else:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            reports = list(pool.map(lambda s: run_scenario(s, out_dir),
                                    scenarios))
    if out_dir is not None:
        index = {
            r.scenario.name: {"status": r.status, "passed": r.passed}
            for r in sorted(reports, key=lambda r: r.scenario.name)
        }
        payload = json.dumps(index, indent=2, sort_keys=True)
        Path(out_dir, "index.json").write_bytes((payload + "\n").encode())
    return reports


# ---------------------------------------------------------------------------
# command line


def _cmd_predict(args) -> int:
    pred = predict(args.beta, args.theta, args.forcing_lambda)
    out = {
        "beta": pred.beta, "theta": pred.theta, "Lambda": pred.lambda_limit,
        "C2": pred.growth_constant, "L": pred.lower, "U": pred.upper,
        "lambda": pred.forcing_lambda, "zeta": pred.zeta,
        "classification": pred.classification,
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_presets(args) -> int:
    for name, desc in list_presets():
        print(f"{name:24s} {desc}")
    return 0


def _print_report(report: Report) -> None:
    print(f"scenario {report.scenario.name}: status={report.status} "
          f"({report.runtime_seconds:.2f}s)")
    for c in report.checks:
        label = c["check"].get("type", "?")
        ser = c["check"].get("series", "")
        verdict = "PASS" if c["passed"] else "FAIL"
        detail = c.get("error") or f"value={c.get('value')}"
        print(f"  [{verdict}] {label}{' ' + ser if ser else ''}: {detail}")


def _cmd_solve(args) -> int:
    text = Path(args.config).read_text()
    doc = json.loads(text)
    docs = doc["scenarios"] if isinstance(doc, dict) and "scenarios" in doc else [doc]
    scenarios = [parse_scenario(d) for d in docs]
    reports = run_batch(scenarios, args.out)
    ok = True
    for r in reports:
        _print_report(r)
        ok = ok and r.status != "failed"
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    s = load_preset(args.preset, t_max=args.tmax, step=args.step)
    report = run_scenario(s, args.out)
    _print_report(report)
    return 0 if report.passed else 1


def _cmd_convlemma(args) -> int:
    rho, sigma = args.rho, args.sigma
    a = lambda s: s ** rho
    b = lambda s: s ** sigma
    from .specfun import beta_fn

    target = beta_fn(rho + 1.0, sigma + 1.0)
    ts, t = [], 1.0
    while t <= args.tmax * (1 + 1e-12):
        ts.append(t)
        t *= 10.0
    print(f"target B(rho+1, sigma+1) = {target:.12g}")
    ok = True
    for t in ts:
        r = convolution_ratio(rho, sigma, a, b, t)
        dev = abs(r / target - 1.0)
        ok = ok and dev <= 1e-7
        print(f"t={t:10.1f}  ratio={r:.12g}  rel_dev={dev:.3e}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="volgrowth",
        description="solve sublinear memory-growth equations and verify "
                    "their predicted asymptotic rates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="print rate constants as JSON")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--lambda", dest="forcing_lambda", type=float, default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("solve", help="run scenario config file(s)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="run a named preset; exit 0 iff pass")
    p.add_argument("--preset", required=True)
    p.add_argument("--tmax", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("convlemma", help="convolution ratio vs Beta target")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--tmax", type=float, default=100.0)
    p.set_defaults(func=_cmd_convlemma)

    p = sub.add_parser("presets", help="list available presets")
    p.set_defaults(func=_cmd_presets)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, DomainError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
