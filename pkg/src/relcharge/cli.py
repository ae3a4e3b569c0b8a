"""``relcharge`` command line: simulate, scan, compare, sweep.

Exit codes: 0 success, 1 a comparison or sweep check failed, 2 invalid
config, 3 domain or integration error, 4 unsupported operation.
"""

from __future__ import annotations

import argparse
import logging
import math
import multiprocessing
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .closedform import CLOSED_FORMS
from .config import ConfigError, RunConfig, load_config
from .core import FRONT
from .dynamics import make_rhs
from .errors import IntegrationError, RelchargeError, UnsupportedOperationError
from .fields import TmMode
from .integrator import integrate, solve_batch
from .invariants import drift_report, invariant_set
from .symmetry import sample_points, symmetry_scan

log = logging.getLogger("relcharge")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DOMAIN, EXIT_UNSUPPORTED = 0, 1, 2, 3, 4


# --- deterministic serialisation ------------------------------------------------------------


def _fmt_float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    return "%.17g" % v


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with sorted keys and every float written as ``%.17g``."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return _json_str(str(obj))


def _json_str(s: str) -> str:
    import json

    return json.dumps(s)


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")


def write_csv(path: Path, header: list[str], rows: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=",".join(header), comments="")


# --- shared helpers ----------------------------------------------------------------------------


def _out_path(cfg: RunConfig, suffix: str) -> Path:
    prefix = cfg.output.prefix or cfg.field.name
    return Path(cfg.output.dir) / f"{prefix}_{suffix}"


def _tracked(cfg: RunConfig, spec, form):
    """Tracked phase functions in config order (default: every built-in one)."""
    x_plus_ref = cfg.time_span[0] if isinstance(spec, TmMode) else None
    invset = invariant_set(spec, x_plus_ref=x_plus_ref)
    if invset.form != form:
        if cfg.tracked:
            raise ConfigError(f"invariants of {invset.system} are defined in the {invset.form} form, not {form}")
        return invset, []
    names = cfg.tracked if cfg.tracked is not None else invset.names
    unknown = [n for n in names if n not in invset.names]
    if unknown:
        raise ConfigError(f"tracked: unknown invariants {unknown}; available {invset.names}")
    return invset, [invset[n] for n in names]


def _state_columns(form) -> list[str]:
    from .core import state_class

    cls = state_class(form)
    return [cls.time_name, *cls.phase_names]


# --- commands ---------------------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> tuple[int, dict]:
    spec = cfg.spec()
    form = cfg.active_form
    invset, tracked = _tracked(cfg, spec, form)
    start = time.perf_counter()
    summary = {
        "command": "simulate",
        "system": spec.name,
        "form": form,
        "field": spec.to_dict(),
        "time_span": list(cfg.time_span),
        "rtol": cfg.rtol,
        "atol": cfg.atol,
    }
    code = EXIT_OK
    try:
        traj = integrate(spec, cfg.initial_state(), cfg.time_span, cfg.rtol, cfg.atol, tracked)
        summary["status"] = "ok"
    except IntegrationError as exc:
        traj = exc.trajectory
        code = EXIT_DOMAIN
        summary.update(
            status="error",
            error=type(exc).__name__,
            message=str(exc),
            last_time=exc.last_time,
            last_phase=None if exc.last_phase is None else list(exc.last_phase),
        )
    if traj is not None:
        header = _state_columns(form) + [q.name for q in tracked]
        cols = [traj.times[:, None], traj.phases] + [traj.invariants[q.name][:, None] for q in tracked]
        csv_path = _out_path(cfg, "trajectory.csv")
        write_csv(csv_path, header, np.hstack(cols))
        summary.update(
            csv=str(csv_path),
            samples=len(traj),
            steps=traj.steps,
            rejected=traj.rejected,
            **drift_report(invset, traj, [q.name for q in tracked]),
        )
    summary["wall_time"] = time.perf_counter() - start
    write_json(_out_path(cfg, "summary.json"), summary)
    return code, summary


def cmd_scan(cfg: RunConfig) -> tuple[int, dict]:
    spec = cfg.spec()
    points = sample_points(spec, cfg.scan.samples, seed=cfg.seed, box=cfg.scan.box)
    result = symmetry_scan(spec, points, cfg.scan.tol)
    report = {"command": "scan", "system": spec.name, "seed": cfg.seed, "field": spec.to_dict(), **result.to_dict()}
    write_json(_out_path(cfg, "scan.json"), report)
    return EXIT_OK, report


def cmd_compare(cfg: RunConfig) -> tuple[int, dict]:
    spec = cfg.spec()
    if spec.name not in CLOSED_FORMS:
        raise UnsupportedOperationError(f"no closed form for {spec.name}; available: {sorted(CLOSED_FORMS)}")
    if cfg.active_form != FRONT:
        raise UnsupportedOperationError("closed-form orbits are front-form")
    initial = cfg.initial_state()
    traj = integrate(spec, initial, cfg.time_span, cfg.rtol, cfg.atol)
    orbit = CLOSED_FORMS[spec.name](spec, initial)
    closed = orbit.phase_at(traj.times)
    dev = np.max(np.abs(closed - traj.phases), axis=0)
    names = list(initial.phase_names)
    worst = float(np.max(dev))
    passed = worst <= cfg.compare.tolerance
    report = {
        "command": "compare",
        "system": spec.name,
        "field": spec.to_dict(),
        "time_span": list(cfg.time_span),
        "rtol": cfg.rtol,
        "atol": cfg.atol,
        "samples": len(traj),
        "max_deviation": dict(zip(names, dev.tolist())),
        "max_deviation_overall": worst,
        "tolerance": cfg.compare.tolerance,
        "pass": passed,
    }
    write_json(_out_path(cfg, "compare.json"), report)
    return (EXIT_OK if passed else EXIT_CHECK_FAILED), report


def _sweep_chunk(spec, form, t0, t1, Y0, P, rtol, atol, names, x_plus_ref):
    invset = invariant_set(spec, x_plus_ref=x_plus_ref)
    tracked = [invset[n] for n in names]
    res = solve_batch(spec, form, t0, Y0, t1, P, rtol, atol, tracked)
    return res.status, res.steps, res.rejected, res.drift


def run_sweep(cfg: RunConfig, workers: int | None = None) -> dict:
    """Run the configured grid; returns the aggregate report (no timing inside)."""
    values, specs = cfg.sweep_specs()
    spec = specs[0]
    form = cfg.active_form
    invset, tracked = _tracked(cfg, spec, form)
    tracked = [q for q in tracked if q.vectorized is not None]
    names = [q.name for q in tracked]
    n = len(values)
    P = np.array([s.param_values() for s in specs], dtype=float).reshape(n, -1)
    base = cfg.initial_state().phase
    Y0 = np.tile(base, (n, 1))
    if cfg.sweep.jitter:
        rng = np.random.default_rng(cfg.seed)
        cols = [1, 2] if form == FRONT else [0, 1]
        Y0[:, cols] += cfg.sweep.jitter * rng.standard_normal((n, 2))
    workers = workers or cfg.workers or os.cpu_count() or 1
    size = max(1, min(cfg.sweep.chunk_size, math.ceil(n / workers)))
    chunks = [slice(k, min(k + size, n)) for k in range(0, n, size)]
    x_plus_ref = cfg.time_span[0] if isinstance(spec, TmMode) else None
    t0, t1 = cfg.time_span
    args = [(spec, form, t0, t1, Y0[c], P[c], cfg.rtol, cfg.atol, names, x_plus_ref) for c in chunks]
    make_rhs(spec, form, vectorized=True)  # compile once before forking
    if workers > 1 and len(chunks) > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_sweep_chunk, *zip(*args)))
    else:
        results = [_sweep_chunk(*a) for a in args]
    status = [s for r in results for s in r[0]]
    steps = np.concatenate([r[1] for r in results])
    rejected = np.concatenate([r[2] for r in results])
    drift = {nm: np.concatenate([r[3][nm] for r in results]) for nm in names}
    tol = cfg.sweep.drift_tolerance
    records = []
    for k in range(n):
        d = {nm: float(drift[nm][k]) for nm in names}
        ok = status[k] == "ok" and (tol is None or all(v <= tol for v in d.values()))
        records.append(
            {
                "index": k,
                "value": float(values[k]),
                "status": status[k],
                "steps": int(steps[k]),
                "rejected": int(rejected[k]),
                "drift": d,
                "pass": ok,
            }
        )
    passed = sum(r["pass"] for r in records)
    return {
        "command": "sweep",
        "system": spec.name,
        "parameter": cfg.sweep.parameter,
        "seed": cfg.seed,
        "time_span": list(cfg.time_span),
        "rtol": cfg.rtol,
        "atol": cfg.atol,
        "drift_tolerance": tol,
        "count": n,
        "passed": passed,
        "failed": n - passed,
        "integration_failures": sum(s != "ok" for s in status),
        "drift": {
            nm: {"max": float(np.max(drift[nm])), "median": float(np.median(drift[nm]))} for nm in names
        },
        "records": records,
    }


def cmd_sweep(cfg: RunConfig, workers: int | None = None) -> tuple[int, dict]:
    if cfg.sweep is None:
        raise ConfigError("sweep: the config has no 'sweep' block")
    report = run_sweep(cfg, workers)
    write_json(_out_path(cfg, "sweep.json"), report)
    if report["integration_failures"]:
        return EXIT_DOMAIN, report
    return (EXIT_OK if report["failed"] == 0 else EXIT_CHECK_FAILED), report


COMMANDS = {"simulate": cmd_simulate, "scan": cmd_scan, "compare": cmd_compare, "sweep": cmd_sweep}


# --- entry point ------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relcharge", description="Charged-particle dynamics in background fields.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--threads", type=int, help="worker count for sweeps (overrides workers)")
    parser.add_argument("--seed", type=int, help="seed for scans and sweeps (overrides seed)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _summary_line(command: str, report: dict) -> str:
    if command == "scan":
        return f"scan {report['system']}: dimension {report['dimension']}"
    if command == "compare":
        return f"compare {report['system']}: max deviation {report['max_deviation_overall']:.3e} pass={report['pass']}"
    if command == "sweep":
        return f"sweep {report['system']}: {report['passed']}/{report['count']} passed"
    drift = report.get("drift", {})
    worst = max(drift.values()) if drift else float("nan")
    return f"simulate {report['system']}: status {report['status']}, {report.get('steps', 0)} steps, max drift {worst:.3e}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = {"seed": args.seed, "workers": args.threads}
        cfg = load_config(args.config, overrides)
        if args.out:
            cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"dir": args.out})})
        if args.command == "sweep":
            code, report = cmd_sweep(cfg, args.threads)
        else:
            code, report = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedOperationError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (RelchargeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    print(_summary_line(args.command, report))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
