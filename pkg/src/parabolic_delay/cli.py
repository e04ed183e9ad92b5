"""Command line front end: ``parabolic-delay <command> --config scenario.json``.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid config, 3 when a solver invariant is violated.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .analysis import (coefficient_convergence_experiment, delay_convergence_experiment,
                       estimate_constants, gronwall_check, ic_continuity_experiment,
                       stability_constant)
from .coefficients import coefficients_from_dict, delay_from_dict, flatten
from .delay_solver import (HistorySegment, mild_solve_march, mild_solve_picard,
                           write_trajectory_csv)
from .discretization import SpaceGrid, discrete_norm
from .errors import DomainError, InvariantViolation, PreconditionError
from .propagator import (Propagator, PropagatorOptions, adjoint_propagate, propagate,
                         propagate_kernel, smoothing_exponent_fit, verify_cocycle)
from .scenarios import history_steps, mode_profile, random_history

COMMANDS = ("solve", "verify", "smoothing", "gronwall", "converge-ic", "converge-coeff",
            "converge-delay", "sweep")
NORM_EXACT = {1.0, 2.0, math.inf}

_ladder = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["schema_version", "grid", "coefficients", "T"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "T": {"type": "number", "exclusiveMinimum": 0, "maximum": 100},
        "p": {"oneOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]},
        "grid": {
            "type": "object", "required": ["cells"], "additionalProperties": False,
            "properties": {
                "cells": {"type": "array", "minItems": 1, "maxItems": 2,
                          "items": {"type": "integer", "minimum": 3}},
                "lengths": {"type": "array", "minItems": 1, "maxItems": 2,
                            "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "coefficients": {"type": "object"},
        "delay": {"type": "object", "required": ["kind"]},
        "history": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "mode", "random"]},
                "value": {"type": "number"},
                "k": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "amplitude": {"type": "number"},
                "slope": {"type": "number"},
                "modes": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "scheme": {"enum": ["backward_euler", "crank_nicolson"]},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "positivity_safe": {"type": "boolean"},
                "method": {"enum": ["march", "picard"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "experiments": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "verify": {"type": "object", "properties": {
                    "cases": {"type": "integer", "minimum": 1}}},
                "smoothing": {"type": "object", "properties": {
                    "times": _ladder, "tolerance": {"type": "number", "exclusiveMinimum": 0}}},
                "gronwall": {"type": "object", "properties": {
                    "stride": {"type": "integer", "minimum": 1}}},
                "converge-ic": {"type": "object", "properties": {
                    "eps": _ladder, "seed": {"type": "integer", "minimum": 0}}},
                "converge-coeff": {"type": "object", "properties": {
                    "m": _ladder, "amplitude": {"type": "number"},
                    "T1": {"type": "number", "exclusiveMinimum": 0}}},
                "converge-delay": {"type": "object", "properties": {"m": _ladder}},
            },
        },
        "output": {"type": "string"},
        "sweep": {
            "type": "array",
            "items": {
                "type": "object", "required": ["name", "command"], "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "command": {"enum": [c for c in COMMANDS if c != "sweep"]},
                    "overrides": {"type": "object"},
                },
            },
        },
    },
}


class ConfigError(ValueError):
    pass


def _path(err):
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def validate_config(cfg):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError("\n".join(f"config error at {_path(e)}: {e.message}" for e in errors))


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    validate_config(cfg)
    return cfg


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _norm_p(cfg):
    p = cfg.get("p", 2)
    return math.inf if p == "inf" else float(p)


class Problem:
    """Everything a command needs, built from a validated config."""

    def __init__(self, cfg, seed):
        self.cfg = cfg
        self.seed = seed
        self.p = _norm_p(cfg)
        coef = dict(cfg["coefficients"])
        coef["T"] = cfg["T"]
        dim = len(cfg["grid"]["cells"])
        coef.setdefault("dim", dim)
        lengths = cfg["grid"].get("lengths", coef.get("lengths", [1.0] * dim))
        coef["lengths"] = lengths
        try:
            self.a = coefficients_from_dict(coef)
            self.grid = SpaceGrid(tuple(lengths), tuple(cfg["grid"]["cells"]), self.a.bc)
            self.R = delay_from_dict(cfg.get("delay", {"kind": "constant", "r": 0.0}))
            solver = cfg.get("solver", {})
            self.opts = PropagatorOptions(solver.get("scheme", "backward_euler"),
                                          solver.get("dt", 1e-3),
                                          solver.get("positivity_safe", False))
        except (DomainError, KeyError, TypeError) as exc:
            raise ConfigError(f"config error: {exc}") from None
        if self.a.dim != dim:
            raise ConfigError("config error at coefficients.dim: does not match grid.cells")
        if abs(round(self.a.T / self.opts.dt) * self.opts.dt - self.a.T) > 1e-9 * self.a.T:
            raise ConfigError("config error at solver.dt: T must be a multiple of dt")
        self.method = cfg.get("solver", {}).get("method", "march")
        self.tol = cfg.get("solver", {}).get("tol")
        self.P = Propagator(flatten(self.a), self.grid, self.opts)
        self.u0 = self._history(cfg.get("history", {"kind": "mode"}))

    def _history(self, h):
        K = history_steps(self.opts.dt)
        if h["kind"] == "constant":
            return HistorySegment.constant(np.full(self.grid.size, float(h.get("value", 1.0))), K)
        if h["kind"] == "mode":
            k = tuple(h.get("k", [1] * self.grid.dim))
            if len(k) != self.grid.dim:
                raise ConfigError("config error at history.k: need one index per axis")
            shape = float(h.get("amplitude", 1.0)) * mode_profile(self.grid, k)
            slope = float(h.get("slope", 0.0))
            th = -1.0 + np.arange(K + 1) / K
            return HistorySegment(np.outer(1.0 + slope * th, shape))
        rng = np.random.default_rng(h.get("seed", self.seed))
        return random_history(rng, self.grid, K, h.get("modes", 3))

    def require_exact_p(self, what):
        if self.p not in NORM_EXACT:
            raise ConfigError(f"config error at p: {what} needs p in {{1, 2, \"inf\"}}")

    def solve(self, u0=None):
        u0 = self.u0 if u0 is None else u0
        if self.method == "picard":
            tol = self.tol or 1e-8 * max(u0.sup_norm(self.p, self.grid), 1e-300)
            p = self.p if self.p in NORM_EXACT else 2
            return mild_solve_picard(self.a, self.grid, u0, self.R, tol=tol, p=p,
                                     propagator=self.P)
        return mild_solve_march(self.a, self.grid, u0, self.R, propagator=self.P)

    def experiment(self, name):
        return self.cfg.get("experiments", {}).get(name, {})


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_plain)
        fh.write("\n")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def _p_label(p):
    return "inf" if math.isinf(p) else p


def cmd_solve(pb, out, threads):
    traj = pb.solve()
    write_trajectory_csv(traj, out / "trajectory.csv", out / "trajectory.json")
    seam = bool(np.array_equal(traj.states[0], traj.history.states[-1]))
    norms = [discrete_norm(s, pb.p, pb.grid) for s in traj.nodes]
    return {"checks": {"seam": seam}, "final_norm": norms[-1], "max_norm": max(norms),
            "nodes": traj.frontier + 1, "method": traj.info.get("method")}


def cmd_verify(pb, out, threads):
    cases = pb.experiment("verify").get("cases", 10)
    rng = np.random.default_rng(pb.seed)
    n = pb.P.n_steps
    coc, dual = 0.0, 0.0
    for _ in range(cases):
        k0, k1, k2 = np.sort(rng.integers(0, n + 1, size=3))
        u = rng.standard_normal(pb.grid.size)
        v = rng.standard_normal(pb.grid.size)
        dt = pb.opts.dt
        coc = max(coc, verify_cocycle(pb.P, k0 * dt, k1 * dt, k2 * dt, u))
        Uu = propagate(pb.P, k0 * dt, k2 * dt, u)
        Usv = adjoint_propagate(pb.P, k2 * dt, k0 * dt, v)
        dual = max(dual, abs(Uu @ v - u @ Usv) / (np.linalg.norm(u) * np.linalg.norm(v)))
    checks = {"cocycle": coc == 0.0, "duality": dual <= 1e-10}
    result = {"cocycle_residual": coc, "duality_residual": dual, "cases": cases}
    if (pb.opts.scheme == "backward_euler" and pb.opts.positivity_safe
            and pb.a.c0.upper_bound() <= 0):
        K = propagate_kernel(pb.P, 0.0, min(pb.a.T, 10 * pb.opts.dt))
        ratio = float(K.min() / K.max())
        result["kernel_min_over_max"] = ratio
        checks["positivity"] = ratio >= -1e-12
    result["checks"] = checks
    return result


def cmd_smoothing(pb, out, threads):
    cfg = pb.experiment("smoothing")
    hmax = max(pb.grid.h)
    times = cfg.get("times") or [4 * hmax ** 2 * 2 ** k for k in range(6)]
    tol = cfg.get("tolerance", 0.075 * pb.grid.dim)
    fit = smoothing_exponent_fit(pb.P, times)
    target = -pb.grid.dim / 2
    _write_rows(out / "smoothing.csv", ["t", "norm_1_inf"], zip(fit.times, fit.norms))
    return {"slope": fit.slope, "target": target, "tolerance": tol, "flagged": fit.flagged,
            "fit_window": [fit.times[0], fit.times[-1]],
            "checks": {"slope": abs(fit.slope - target) <= tol}}


def cmd_gronwall(pb, out, threads):
    pb.require_exact_p("gronwall")
    stride = pb.experiment("gronwall").get("stride", 1)
    consts = estimate_constants(pb.a, pb.P, pb.p, stride=stride)
    traj = pb.solve()
    res = gronwall_check(traj, consts["M1"], consts["M2"], pb.p)
    ratio = stability_constant([traj], pb.p)
    _write_rows(out / "gronwall.csv", ["t", "delta", "bound", "ratio"],
                [(t, d, b, d / b if b > 0 else 0.0)
                 for t, d, b in zip(res.times, res.deltas, res.bounds)])
    return {"constants": consts, "max_ratio": res.max_ratio, "stability_ratio": ratio,
            "checks": {"gronwall": res.passed, "stability": ratio <= consts["Mbar"]}}


def _report(report, out, name):
    report.write_csv(out / f"{name}.csv")
    summary = report.summary()
    summary["checks"] = dict(report.checks)
    return summary


def cmd_converge_ic(pb, out, threads):
    pb.require_exact_p("converge-ic")
    cfg = pb.experiment("converge-ic")
    eps = cfg.get("eps", [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    rng = np.random.default_rng(cfg.get("seed", pb.seed))
    w = random_history(rng, pb.grid, pb.u0.K)
    rep = ic_continuity_experiment(pb.a, pb.grid, pb.R, pb.u0, w, eps, p=pb.p,
                                   propagator=pb.P, threads=threads, scenario=pb.name)
    return _report(rep, out, "converge-ic")


def cmd_converge_coeff(pb, out, threads):
    pb.require_exact_p("converge-coeff")
    cfg = pb.experiment("converge-coeff")
    rep = coefficient_convergence_experiment(
        pb.a, pb.grid, pb.R, pb.u0, cfg.get("T1", 0.25 * pb.a.T),
        [int(m) for m in cfg.get("m", [4, 8, 16, 32, 64])], cfg.get("amplitude", 1.0),
        p=pb.p, propagator=pb.P, threads=threads, scenario=pb.name)
    return _report(rep, out, "converge-coeff")


def cmd_converge_delay(pb, out, threads):
    pb.require_exact_p("converge-delay")
    cfg = pb.experiment("converge-delay")
    rep = delay_convergence_experiment(
        pb.a, pb.grid, pb.u0, pb.R, [int(m) for m in cfg.get("m", [4, 8, 16, 32, 64])],
        p=pb.p, propagator=pb.P, threads=threads, scenario=pb.name)
    return _report(rep, out, "converge-delay")


HANDLERS = {
    "solve": cmd_solve, "verify": cmd_verify, "smoothing": cmd_smoothing,
    "gronwall": cmd_gronwall, "converge-ic": cmd_converge_ic,
    "converge-coeff": cmd_converge_coeff, "converge-delay": cmd_converge_delay,
}


def run_command(command, cfg, out, seed, threads):
    """Run one command; returns ``(exit_code, summary)`` and writes ``summary.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"command": command, "name": cfg.get("name", "scenario"), "seed": seed,
               "p": _p_label(_norm_p(cfg))}
    try:
        pb = Problem(cfg, seed)
        pb.name = summary["name"]
        summary.update(HANDLERS[command](pb, out, threads))
    except ConfigError as exc:
        summary.update(error=str(exc), passed=False)
        _dump_json(summary, out / "summary.json")
        return 2, summary
    except InvariantViolation as exc:
        summary.update(error=str(exc), violated=exc.tag, passed=False)
        _dump_json(summary, out / "summary.json")
        return 3, summary
    except (DomainError, PreconditionError) as exc:
        summary.update(error=f"{type(exc).__name__}: {exc}", passed=False)
        _dump_json(summary, out / "summary.json")
        return 2, summary
    summary["passed"] = all(summary.get("checks", {}).values())
    _dump_json(summary, out / "summary.json")
    return (0 if summary["passed"] else 1), summary


def run_sweep(cfg, out, seed, threads):
    items = cfg.get("sweep")
    if not items:
        raise ConfigError("config error at sweep: sweep needs a nonempty list of items")
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    names = [it["name"] for it in items]
    if len(set(names)) != len(names):
        raise ConfigError("config error at sweep: item names must be unique")
    jobs = []
    for it in items:
        sub = _merge(base, it.get("overrides", {}))
        sub["name"] = it["name"]
        validate_config(sub)
        jobs.append((it["command"], sub, Path(out) / it["name"]))

    def job(args):
        command, sub, path = args
        return run_command(command, sub, path, seed, 1)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(job, jobs))
    table = {name: {"command": j[0], "exit": code, "passed": s.get("passed", False)}
             for name, j, (code, s) in zip(names, jobs, results)}
    summary = {"command": "sweep", "seed": seed, "items": table,
               "passed": all(r["passed"] for r in table.values())}
    _dump_json(summary, Path(out) / "sweep.json")
    codes = [code for code, _ in results]
    worst = max(codes) if codes else 0
    return worst, summary


def _default_threads():
    try:
        return max(1, int(os.environ.get("PARABOLIC_DELAY_THREADS", "1")))
    except ValueError:
        return 1


def build_parser():
    parser = argparse.ArgumentParser(prog="parabolic-delay",
                                     description="Linear parabolic problems with time delay.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="scenario JSON file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=_default_threads())
        sp.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("config error at --seed: must be an unsigned 64-bit integer")
        out = Path(args.out or cfg.get("output", "out"))
        if args.command == "sweep":
            code, summary = run_sweep(cfg, out, seed, args.threads)
        else:
            code, summary = run_command(args.command, cfg, out, seed, args.threads)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    if code == 2:
        print(summary.get("error", "invalid config"), file=sys.stderr)
    elif code == 3:
        print(f"invariant violation [{summary.get('violated')}]: {summary.get('error')}",
              file=sys.stderr)
    elif code == 1:
        failed = [k for k, v in summary.get("checks", {}).items() if not v]
        print(f"checks failed: {', '.join(failed) or 'see summary'}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
