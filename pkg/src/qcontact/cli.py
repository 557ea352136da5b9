"""Command-line front end: ``qcontact {simulate,verify,pontryagin,parse}``.

Exit codes: 0 success, 1 verification failures, 2 configuration or model
errors, 3 integration failure, 4 the forward curve is not an extremal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from .dynamics import (IntegrationError, IntegratorConfig, NotAnExtremal, energy_series,
                       integrate, integrate_pontryagin, verify_stationarity,
                       write_pontryagin_csv, write_trajectory_csv)
from .expressions import ExpressionError, dump, parse_expression, to_text
from .geometry import InconsistentSystem
from .lagrangian import SingularLagrangian
from .models import ConfigError, ModelConfig
from .suites import SUITES, base_tolerance, run_suites

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_EXTREMAL = 0, 1, 2, 3, 4


# --------------------------------------------------------------------------- serialisation

def _clean(obj):
    """Make a value JSON-safe: numpy scalars to float, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "NaN" if math.isnan(x) else ("Infinity" if x > 0 else "-Infinity")
        # %.17g and back gives the same double; json then prints its round-trip repr
        return float(f"{x:.17g}")
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def config_digest(cfg: ModelConfig, extra: dict | None = None) -> str:
    payload = {"model": cfg.canonical(), "flags": extra or {}}
    blob = json.dumps(_clean(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------------------------------------------------------- helpers

def _model_config(args) -> ModelConfig:
    if args.builtin is not None:
        return ModelConfig(builtin=args.builtin, expressions=None)
    return ModelConfig.load(args.config)


def _initial(text: str | None, dim: int):
    if text is None:
        return None
    try:
        values = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--initial: cannot parse {text!r} as numbers") from exc
    if len(values) != dim:
        raise ConfigError(f"--initial needs {dim} comma-separated numbers, got {len(values)}")
    return tuple(values)


def _integrator(args, default_t1: float) -> IntegratorConfig:
    abs_tol = args.abs_tol if args.abs_tol is not None else (args.tol or 1e-10)
    rel_tol = args.rel_tol if args.rel_tol is not None else (args.tol or 1e-9)
    try:
        return IntegratorConfig(method=args.method, t0=args.t0,
                                t1=args.t1 if args.t1 is not None else default_t1,
                                step=args.step, abs_tol=abs_tol, rel_tol=rel_tol,
                                max_step=args.max_step if args.max_step else math.inf,
                                stride=args.stride)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _error(msg: str) -> None:
    print(f"qcontact: error: {msg}", file=sys.stderr)


def _write_text(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# --------------------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    cfg = _model_config(args)
    model = cfg.build()
    init = _initial(args.initial, 2 * model.n + model.qcount) or model.initial
    icfg = _integrator(args, model.t1)
    traj = integrate(model.vector_field(), np.array(init), icfg, model.n, model.qcount,
                     model_id=model.name)
    energy = energy_series(model.lagrangian, traj) if model.is_lagrangian else None
    if args.output in (None, "-"):
        write_trajectory_csv(traj, sys.stdout, energy)
    else:
        write_trajectory_csv(traj, args.output, energy)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _model_config(args)
    model = cfg.build()
    suites = SUITES if args.suite == "all" else (args.suite,)
    tol = base_tolerance(args.base_tol)
    start = time.perf_counter()
    checks = run_suites(model, suites, points=args.points, seed=args.seed, tol=tol)
    elapsed = time.perf_counter() - start
    passed = all(c.passed for c in checks)
    report = {
        "model": model.name,
        "config_digest": config_digest(cfg, {"suite": args.suite, "points": args.points,
                                             "seed": args.seed, "base_tol": tol}),
        "suites": list(suites),
        "base_tolerance": tol,
        "checks": [c.as_dict() for c in checks],
        "summary": {"total": len(checks), "passed": sum(c.passed for c in checks),
                    "failed": [c.name for c in checks if not c.passed]},
        "pass": passed,
    }
    if args.wall_time:
        report["wall_time"] = elapsed
    _write_text(args.output, dumps(report))
    for c in checks:
        if not c.passed:
            print(f"FAIL {c.name}: residual {c.max_residual:.3e} vs tolerance "
                  f"{c.tolerance:.1e}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_pontryagin(args) -> int:
    cfg = _model_config(args)
    model = cfg.build()
    if not model.is_lagrangian:
        raise ConfigError(f"pontryagin needs a Lagrangian model; {model.name} is a structure")
    init = _initial(args.initial, 2 * model.n + model.qcount) or model.initial
    icfg = _integrator(args, model.t1)
    traj = integrate(model.lagrangian, np.array(init), icfg, model.n, model.qcount,
                     model_id=model.name)
    run = integrate_pontryagin(model.lagrangian, traj, extremal_tol=args.extremal_tol)
    rep = verify_stationarity(run, model.lagrangian, tol=args.stationarity_tol)
    if args.output is not None:
        write_pontryagin_csv(run, args.output)
    report = {
        "model": model.name,
        "config_digest": config_digest(cfg, {"t0": icfg.t0, "t1": icfg.t1,
                                             "method": icfg.method}),
        "M_t0": float(run.M[0]), "M_t1": float(run.M[-1]),
        "M_positive": run.metadata["M_positive"],
        "transversality": run.transversality,
        "stationarity": rep.as_dict(),
        "pass": rep.passed,
    }
    _write_text(args.report, dumps(report))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_parse(args) -> int:
    try:
        node = parse_expression(args.expression)
    except ExpressionError as exc:
        pos = getattr(exc, "position", None)
        _error(str(exc))
        if pos is not None:
            print("  " + args.expression, file=sys.stderr)
            print("  " + " " * pos + "^", file=sys.stderr)
        return EXIT_CONFIG
    print(dump(node))
    print("canonical: " + to_text(node))
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def _model_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", metavar="NAME",
                     help="built-in model, e.g. e1, 'e1(3; 0.1,0.2,0.3)', rocket, contact-r3")
    src.add_argument("--config", metavar="PATH", help="JSON model configuration")


def _integrator_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", default="rk45",
                   choices=["rk45", "rk45-adaptive", "rk4", "rk4-fixed"])
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=None, help="end time (model default if omitted)")
    p.add_argument("--tol", type=float, default=None, help="set both abs and rel tolerance")
    p.add_argument("--abs-tol", type=float, default=None)
    p.add_argument("--rel-tol", type=float, default=None)
    p.add_argument("--step", type=float, default=None, help="rk4 step size")
    p.add_argument("--max-step", type=float, default=None)
    p.add_argument("--stride", type=int, default=1, help="record every k-th step")
    p.add_argument("--initial", default=None, help="comma-separated initial state")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcontact",
                                     description="q-contact Hamiltonian and Lagrangian dynamics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a model and write a trajectory CSV")
    _model_args(p)
    _integrator_args(p)
    p.add_argument("--output", "-o", default=None, help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run verification suites and print a JSON report")
    _model_args(p)
    p.add_argument("--suite", default="all", choices=list(SUITES) + ["all"])
    p.add_argument("--points", type=int, default=20, help="random sample points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--base-tol", type=float, default=None,
                   help="structural tolerance (default: $QCONTACT_TOL or 1e-9)")
    p.add_argument("--wall-time", action="store_true",
                   help="include wall time in the report (breaks byte-identical output)")
    p.add_argument("--output", "-o", default=None, help="report path (stdout if omitted)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("pontryagin", help="forward extremal plus backward adjoints")
    _model_args(p)
    _integrator_args(p)
    p.add_argument("--extremal-tol", type=float, default=1e-5)
    p.add_argument("--stationarity-tol", type=float, default=1e-6)
    p.add_argument("--output", "-o", default=None, help="PontryaginRun CSV path")
    p.add_argument("--report", default=None, help="JSON report path (stdout if omitted)")
    p.set_defaults(func=cmd_pontryagin)

    p = sub.add_parser("parse", help="print the syntax tree of an expression")
    p.add_argument("expression")
    p.set_defaults(func=cmd_parse)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotAnExtremal as exc:
        _error(str(exc))
        return EXIT_EXTREMAL
    except IntegrationError as exc:
        _error(f"integration failed: {exc}")
        return EXIT_INTEGRATION
    except (ConfigError, ExpressionError, SingularLagrangian, InconsistentSystem,
            ValueError) as exc:
        _error(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
