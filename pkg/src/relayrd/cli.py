"""Command line entry point: ``relayrd <command> --config <path> --out <dir>``."""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import replace
from typing import Sequence

import numpy as np
import tomli_w

from . import __version__, cascade, dscd, rdsolve, regions, verify
from .config import ConfigError, ProblemSpec, parse_config
from .probcore import SourceError
from .rdsolve import InfeasibleError

COMMANDS = ("rd", "bounds-dscd", "bounds-cascade", "compare", "scenario", "verify")
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 2, 3, 4
RATE_COLS = ["R_AR", "R_BR", "R_RA", "R_RB"]


def fmt(x) -> str:
    """Fixed 10-significant-digit rendering used in every output file."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if v == 0.0:
            v = 0.0  # no negative zero
        return "%.10g" % v
    return str(x)


def emit(rows: Sequence[Sequence], path: str, fmt_name: str = "csv", header: Sequence[str] | None = None,
         doc: dict | None = None, config_hash: str | None = None) -> None:
    """Write ``rows`` as CSV (header row, LF endings) or ``doc`` as structured text (TOML).

    With ``config_hash`` every CSV row gains a trailing ``config_hash``
    column and a TOML document a top-level ``config_hash`` key.
    """
    if fmt_name == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        tail = [] if config_hash is None else [config_hash]
        if header is not None:
            w.writerow(list(header) + (["config_hash"] if tail else []))
        for r in rows:
            w.writerow([fmt(v) for v in r] + tail)
        data = buf.getvalue()
    elif fmt_name == "structured-text":
        doc = dict(doc or {})
        if config_hash is not None:
            doc = {"config_hash": config_hash, **doc}
        data = tomli_w.dumps(_plain(doc))
    else:
        raise ValueError(f"unknown format {fmt_name!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data)


def _plain(obj):
    """Make a document TOML-safe with the same number rendering as the CSVs."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    return obj


# ---------------------------------------------------------------- commands


def _problems(spec: ProblemSpec):
    js, dA, dB = spec.source(), spec.d_A(), spec.d_B()
    return [regions.Problem(js, dA, dB, a, b) for a, b in spec.budget_pairs()]


def _weights(spec: ProblemSpec):
    if spec.weights is not None:
        return [tuple(w) for w in spec.weights]
    return regions.default_weights(spec.solver.get("seed", 0))


def _sample_rows(sample: regions.RegionSample, hull_ids: set[int]):
    rows = []
    for i, t in enumerate(sample.tuples):
        rows.append([sample.scheme, t.budget_A, t.budget_B, *t.weights, *t.rates, t.D_A, t.D_B,
                     int(i in hull_ids), "ok"])
    for w, why in sample.failures:
        rows.append([sample.scheme, sample.budgets[0], sample.budgets[1], *w, "", "", "", "", "", "", 0,
                     "failed: " + why])
    return rows


SAMPLE_HEADER = ["scheme", "budget_A", "budget_B", "w_AR", "w_BR", "w_RA", "w_RB", *RATE_COLS,
                 "D_A", "D_B", "on_hull", "status"]


def _sample(scheme: str, prob, spec: ProblemSpec, threads: int, **opts) -> regions.RegionSample:
    return regions.sample_region(scheme, prob, _weights(spec), spec.cfg(), threads, **opts)


def _hull_ids(sample):
    hull = regions.convex_hull(sample)
    ids = {id(t) for t in hull.tuples}
    return {i for i, t in enumerate(sample.tuples) if id(t) in ids}


def cmd_rd(spec: ProblemSpec, out: str, threads: int) -> dict:
    run = spec.run
    selector = run.get("selector", "wyner_ziv")
    source = run.get("source", "X")
    if source not in ("X", "Y"):
        raise ConfigError("run.source must be \"X\" or \"Y\"")
    other = "Y" if source == "X" else "X"
    dec = tuple(run.get("dec_side", [other]))
    enc = tuple(run.get("enc_side", ["Z"]))
    js = spec.source()
    d, grid = (spec.d_B(), spec.DB) if source == "X" else (spec.d_A(), spec.DA)
    curve = rdsolve.rd_curve(selector, js, d, sorted(grid), spec.cfg(), source=source, enc_side=enc, dec_side=dec)
    rows = [[selector, p.budget, p.rate, p.distortion] for p in curve.points]
    emit(rows, os.path.join(out, "rd.csv"), header=["selector", "budget", "rate", "distortion"],
         config_hash=spec.digest())
    return {"files": ["rd.csv"], "selector": selector, "source": source}


def cmd_bounds(spec: ProblemSpec, out: str, threads: int, family: str) -> dict:
    run = spec.run
    bound = run.get("bound", "inner")
    if family == "dscd":
        table = {"inner": "dscd_inner", "outer": "dscd_outer", "cutset": "dscd_cutset"}
    else:
        table = {"inner": "cascade_inner", "outer": "cascade_outer", "kaspi": "kaspi"}
    if bound not in table:
        raise ConfigError(f"run.bound for bounds-{family} must be one of {sorted(table)}")
    opts = {k: run[k] for k in ("template", "reading", "cards") if k in run}
    rows = []
    for prob in _problems(spec):
        s = _sample(table[bound], prob, spec, threads, **opts)
        rows += _sample_rows(s, _hull_ids(s))
    name = f"bounds-{family}.csv"
    emit(rows, os.path.join(out, name), header=SAMPLE_HEADER, config_hash=spec.digest())
    return {"files": [name], "scheme": table[bound]}


def cmd_compare(spec: ProblemSpec, out: str, threads: int) -> dict:
    run = spec.run
    pair = run.get("compare", ["dscd_inner", "cascade_outer"])
    if len(pair) != 2 or any(p not in regions.SCHEMES for p in pair):
        raise ConfigError(f"run.compare needs two schemes from {regions.SCHEMES}")
    tol = run.get("tolerance", regions.DEFAULT_TOL)
    opts = {k: run[k] for k in ("template", "reading", "cards") if k in run}
    rows = []
    for prob in _problems(spec):
        a = _sample(pair[0], prob, spec, threads, **opts)
        b = _sample(pair[1], prob, spec, threads, **opts)
        for i, ta in enumerate(a.tuples):
            for j, tb in enumerate(b.tuples):
                rows.append([prob.D_A, prob.D_B, i, j, regions.dominates(ta, tb, tol), regions.dominates(tb, ta, tol)])
    emit(rows, os.path.join(out, "compare.csv"),
         header=["budget_A", "budget_B", f"{pair[0]}_index", f"{pair[1]}_index",
                 "a_dominates_b", "b_dominates_a"], config_hash=spec.digest())
    return {"files": ["compare.csv"], "schemes": list(pair), "tolerance": tol}


def _tuple_doc(t: dscd.RateTuple) -> dict:
    return {**dict(zip(RATE_COLS, t.rates)), "D_A": t.D_A, "D_B": t.D_B, "budget_A": t.budget_A,
            "budget_B": t.budget_B, "weights": list(t.weights)}


def cmd_scenario(spec: ProblemSpec, out: str, threads: int) -> dict:
    which = spec.run.get("scenario", "case1")
    tol = spec.run.get("tolerance", regions.DEFAULT_TOL)
    fn = {"case1": regions.scenario_case1, "case2": regions.scenario_case2}.get(which)
    if fn is None:
        raise ConfigError("run.scenario must be \"case1\" or \"case2\"")
    reports = []
    rows = []
    for k, prob in enumerate(_problems(spec)):
        rep = fn(prob.js, prob.d_A, prob.d_B, prob.D_A, prob.D_B, spec.cfg(), tol)
        reports.append({"budget_A": prob.D_A, "budget_B": prob.D_B, "verdict": rep.verdict,
                        "thresholds": rep.thresholds, "checks": rep.checks, "tolerances": rep.tolerances,
                        "notes": rep.notes, "tuples": {n: _tuple_doc(t) for n, t in rep.tuples.items()}})
        for name, t in rep.tuples.items():
            rows.append([which, prob.D_A, prob.D_B, name, *t.rates, t.D_A, t.D_B, rep.verdict])
    emit(rows, os.path.join(out, "scenario.csv"),
         header=["scenario", "budget_A", "budget_B", "scheme", *RATE_COLS, "D_A", "D_B", "verdict"],
         config_hash=spec.digest())
    emit([], os.path.join(out, "scenario.toml"), "structured-text", doc={"scenario": which, "reports": reports},
         config_hash=spec.digest())
    return {"files": ["scenario.csv", "scenario.toml"], "scenario": which,
            "verdicts": [r["verdict"] for r in reports]}


def cmd_verify(spec: ProblemSpec, out: str, threads: int) -> dict:
    rows = []
    ok = True
    weights = [tuple(w) for w in spec.weights] if spec.weights is not None else None
    for prob in _problems(spec):
        for c in verify.run_suite(prob, spec.cfg(), weights, threads):
            rows.append([prob.D_A, prob.D_B, c.name, c.measured, c.tolerance, c.passed])
            ok &= c.passed
    emit(rows, os.path.join(out, "verify.csv"),
         header=["budget_A", "budget_B", "check", "measured", "tolerance", "passed"],
         config_hash=spec.digest())
    return {"files": ["verify.csv"], "passed": ok}


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relayrd", description="Rate-distortion bounds for relay-assisted "
                                "interactive source coding.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML problem file")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=None, help="override solver.seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads for weight-vector chunks")
    p.add_argument("--tolerance", type=float, default=None, help="override run.tolerance")
    p.add_argument("--version", action="version", version=f"relayrd {__version__}")
    return p


def run_command(command: str, spec: ProblemSpec, out: str, threads: int = 1) -> tuple[int, dict]:
    os.makedirs(out, exist_ok=True)
    if command == "rd":
        info = cmd_rd(spec, out, threads)
    elif command in ("bounds-dscd", "bounds-cascade"):
        info = cmd_bounds(spec, out, threads, command.split("-")[1])
    elif command == "compare":
        info = cmd_compare(spec, out, threads)
    elif command == "scenario":
        info = cmd_scenario(spec, out, threads)
    elif command == "verify":
        info = cmd_verify(spec, out, threads)
    else:
        raise ConfigError(f"unknown command {command!r}")
    code = EXIT_VERIFY if command == "verify" and not info["passed"] else EXIT_OK
    meta = {"command": command, "version": __version__, "seed": spec.solver.get("seed", 0),
            "config_hash": spec.digest(), "exit_code": code, "result": info, "config": spec.resolved()}
    emit([], os.path.join(out, f"{command}.meta.toml"), "structured-text", doc=meta)
    return code, info


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        spec = parse_config(args.config)
        if args.seed is not None:
            spec = replace(spec, solver={**spec.solver, "seed": args.seed})
        if args.tolerance is not None:
            spec = replace(spec, run={**spec.run, "tolerance": float(args.tolerance)})
        code, info = run_command(args.command, spec, args.out, args.threads)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, SourceError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.command}: wrote {', '.join(info['files'])} to {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
