"""Command-line entry point.

Subcommands: simulate | conditions | functionals | moment-bound | ci.
Configs are strict JSON documents; unknown fields are rejected rather
than silently ignored.  Seed priority: --seed flag, then the config's
seed field, then the TRIMLAB_SEED environment variable.

Exit codes: 0 success, 2 configuration error, 3 numeric degeneracy or
internal consistency failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone

from . import __version__, distributions, momentbound, schedules
from . import functionals as fn
from . import montecarlo as mc
from .errors import (
    ConfigError,
    DegenerateWindowError,
    DomainError,
    InternalConsistencyError,
    MomentError,
    ScheduleError,
    UnboundedQuantileError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3

_ENV_SEED = "TRIMLAB_SEED"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def _require_keys(doc: dict, allowed: set, required: set, what: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown fields in {what}: {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"missing fields in {what}: {sorted(missing)}")


def _resolve_seed(flag_seed, doc: dict):
    if flag_seed is not None:
        return int(flag_seed)
    if "seed" in doc:
        return int(doc["seed"])
    env = os.environ.get(_ENV_SEED)
    if env is not None:
        return int(env)
    return None


def _manifest(args, config_hash: str, started: str, seed, extra: dict | None = None) -> dict:
    doc = {
        "artifact_version": __version__,
        "config_path": args.config,
        "config_hash": config_hash,
        "seed": seed,
        "started_utc": started,
        "finished_utc": _utc_now(),
        "output_path": getattr(args, "out", None),
    }
    if extra:
        doc.update(extra)
    return doc


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _hash_doc(doc: dict) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    doc = _load_config(args.config)
    seed = _resolve_seed(args.seed, doc)
    config = mc.config_from_json(doc, fallback_seed=seed)
    started = _utc_now()
    t0 = time.time()
    report = mc.run_experiment(config, workers=args.workers, ci_level=args.level)
    manifest = _manifest(
        args,
        report.config_hash,
        started,
        config.seed,
        {"runtime_seconds": time.time() - t0, "workers": report.workers, "format": args.format},
    )
    if args.format == "csv":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
        with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        payload = {"manifest": manifest, "report": report.body()}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# conditions
# ---------------------------------------------------------------------------

_CONDITION_KEYS = {"rule", "p", "n_grid", "checks", "family", "params", "t_set", "seed"}
_ALL_CHECKS = ("intermediate", "c_an2", "heavy", "cgh")


def cmd_conditions(args) -> int:
    doc = _load_config(args.config)
    _require_keys(doc, _CONDITION_KEYS, {"rule"}, "conditions config")
    schedule = schedules.from_json(doc["rule"])
    p = float(doc.get("p", 4.0))
    n_grid = tuple(int(v) for v in doc.get("n_grid", schedules.DEFAULT_N_GRID))
    checks = doc.get("checks")
    if checks is None:
        checks = ["intermediate", "c_an2", "heavy"] + (["cgh"] if "family" in doc else [])
    unknown = set(checks) - set(_ALL_CHECKS)
    if unknown:
        raise ConfigError(f"unknown checks: {sorted(unknown)}")
    started = _utc_now()
    reports = []
    for check in checks:
        if check == "intermediate":
            reports.append(schedules.check_intermediate(schedule, p, n_grid))
        elif check == "c_an2":
            reports.append(schedules.check_c_an2(schedule, p, n_grid))
        elif check == "heavy":
            reports.append(schedules.check_heavy(schedule, n_grid))
        else:
            if "family" not in doc or "params" not in doc:
                raise ConfigError("check 'cgh' needs 'family' and 'params' in the config")
            spec = distributions.from_json({"family": doc["family"], "params": doc["params"]})
            t_set = tuple(float(t) for t in doc.get("t_set", (-1.0, 0.0, 1.0)))
            reports.append(schedules.check_cgh(spec, schedule, t_set, n_grid))
    payload = {
        "manifest": _manifest(args, _hash_doc(doc), started, doc.get("seed")),
        "reports": [r.to_json() for r in reports],
    }
    _emit(args, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


def cmd_functionals(args) -> int:
    doc = _load_config(args.config)
    _require_keys(doc, {"family", "params", "window"}, {"family", "params", "window"}, "functionals config")
    spec = distributions.from_json({"family": doc["family"], "params": doc["params"]})
    window = doc["window"]
    if not (isinstance(window, (list, tuple)) and len(window) == 2):
        raise ConfigError("window must be a [u, 1-v] pair")
    u, hi = float(window[0]), float(window[1])
    values = fn.population_functionals(spec, u, 1.0 - hi)
    started = _utc_now()
    payload = {
        "manifest": _manifest(args, _hash_doc(doc), started, None),
        "functionals": {
            "mu": values.mu,
            "sigma2": values.sigma2,
            "winsor_mean": values.winsor_mean,
            "winsor_var": values.winsor_var,
            "window": list(values.window),
        },
    }
    _emit(args, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# moment-bound
# ---------------------------------------------------------------------------

_BOUND_KEYS = {"family", "params", "grid", "replications", "seed"}


def cmd_moment_bound(args) -> int:
    doc = _load_config(args.config)
    _require_keys(doc, _BOUND_KEYS, {"family", "params", "grid"}, "moment-bound config")
    seed = _resolve_seed(args.seed, doc)
    if seed is None:
        raise ConfigError("no seed: provide 'seed' in the config, --seed, or TRIMLAB_SEED")
    spec = distributions.from_json({"family": doc["family"], "params": doc["params"]})
    reps = int(doc.get("replications", 20_000))
    started = _utc_now()
    rows = []
    for idx, cell in enumerate(doc["grid"]):
        _require_keys(cell, {"k", "delta", "i", "n"}, {"k", "delta", "i", "n"}, f"grid cell {idx}")
        query = momentbound.BoundQuery(
            k=float(cell["k"]), delta=float(cell["delta"]), i=int(cell["i"]), n=int(cell["n"])
        )
        rows.append(momentbound.verify_bound(spec, query, reps, seed, stream_index=idx).to_json())
    payload = {
        "manifest": _manifest(args, _hash_doc(doc), started, seed, {"replications": reps}),
        "cells": rows,
    }
    _emit(args, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# ci
# ---------------------------------------------------------------------------

_CI_KEYS = {"family", "params", "data", "rule", "n", "level", "p", "seed"}


def cmd_ci(args) -> int:
    doc = _load_config(args.config)
    _require_keys(doc, _CI_KEYS, {"rule"}, "ci config")
    schedule = schedules.from_json(doc["rule"])
    level = float(args.level if args.level is not None else doc.get("level", 0.95))
    p = float(doc.get("p", 4.0))
    started = _utc_now()
    if "data" in doc:
        if "family" in doc or "params" in doc:
            raise ConfigError("ci config must give either data or a population, not both")
        try:
            with open(doc["data"], "r", encoding="utf-8") as fh:
                data = [float(line) for line in fh if line.strip()]
        except OSError as exc:
            raise ConfigError(f"cannot read data file {doc['data']}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"data file must contain one float per line: {exc}") from exc
        interval = mc.ci_expectation(data, schedule, level=level, p=p)
        seed = None
    else:
        if "family" not in doc or "params" not in doc:
            raise ConfigError("ci config needs either 'data' or 'family'+'params'")
        if "n" not in doc:
            raise ConfigError("spec-mode ci needs the sample size 'n'")
        seed = _resolve_seed(args.seed, doc)
        if seed is None:
            raise ConfigError("no seed: provide 'seed' in the config, --seed, or TRIMLAB_SEED")
        spec = distributions.from_json({"family": doc["family"], "params": doc["params"]})
        interval = mc.ci_expectation(spec, schedule, n=int(doc["n"]), level=level, p=p, seed=seed)
    payload = {
        "manifest": _manifest(args, _hash_doc(doc), started, seed),
        "interval": interval.to_json(),
    }
    _emit(args, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trimlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"trimlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        p.add_argument("--out", required=out_required, help="output path (stdout if omitted)")
        p.add_argument("--seed", type=int, default=None, help="seed override (highest priority)")

    p_sim = sub.add_parser("simulate", help="run a tail-ratio experiment")
    common(p_sim, out_required=True)
    p_sim.add_argument("--format", choices=("json", "csv"), default="json")
    p_sim.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    p_sim.add_argument("--level", type=float, default=0.99, help="binomial CI level for tail counts")
    p_sim.set_defaults(handler=cmd_simulate)

    p_cond = sub.add_parser("conditions", help="diagnose trimming-regime conditions")
    common(p_cond)
    p_cond.set_defaults(handler=cmd_conditions)

    p_fun = sub.add_parser("functionals", help="print window functionals of a population")
    common(p_fun)
    p_fun.set_defaults(handler=cmd_functionals)

    p_mb = sub.add_parser("moment-bound", help="verify the order-statistic moment bound on a grid")
    common(p_mb)
    p_mb.set_defaults(handler=cmd_moment_bound)

    p_ci = sub.add_parser("ci", help="confidence interval for the expectation")
    common(p_ci)
    p_ci.add_argument("--level", type=float, default=None, help="confidence level (default 0.95)")
    p_ci.set_defaults(handler=cmd_ci)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ScheduleError, DomainError, UnboundedQuantileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateWindowError, MomentError, InternalConsistencyError) as exc:
        print(f"numeric degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
