"""Command-line entry point: ``percsim {run,sweep,critical,bounds} config.json``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .bounds import branching_subcritical_bound, interference_constants, theta_moment_check
from .config import ConfigError, Experiment, experiment_from_doc, load_config
from .environments import normalize_environment
from .errors import PercsimError
from .lattice import hexagon_open_probability, hexagon_threshold_interval, peierls_supercritical_bound, saw_subcritical_bound
from .percolation import crossing_probability, default_jobs, find_critical, parameter_sweep
from .point_processes import MarkDistribution, RngStream, Window

CSV_COLUMNS = ["model", "axis", "axis_value", "estimate", "stderr", "reps", "seed", "config_hash"]
OUT_ENV = "PERCSIM_OUT"


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def _rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _row(exp: Experiment, axis, value, est) -> dict:
    return {"model": exp.model.model, "axis": axis, "axis_value": value, "estimate": float(est.estimate),
            "stderr": float(est.stderr), "reps": est.replications, "seed": exp.doc["seed"],
            "config_hash": exp.hash}


def _prepare(exp: Experiment) -> tuple[Experiment, dict]:
    """Resolve an empirical street-length normalization when requested."""
    env = exp.doc.get("env")
    if env and env.get("normalize") and exp.model.env is not None:
        win = Window(2, float(env.get("norm_L", exp.model.L)))
        res = normalize_environment(exp.model.env, env.get("norm_reps", 100),
                                    RngStream(exp.doc["seed"], stream=1), win)
        model = exp.model.with_(env=exp.model.env.with_c_norm(res.estimate))
        return Experiment(exp.doc, model), {"c_norm": res.estimate, "c_norm_stderr": res.stderr}
    return exp, {}


def execute(exp: Experiment, command: str, threads: int) -> tuple[list, dict]:
    """Run a command; returns CSV rows and extra metadata."""
    exp, derived = _prepare(exp)
    rng = RngStream(exp.doc["seed"], stream=0)
    reps = exp.doc.get("reps", 100)
    cfg = exp.model
    if command == "run":
        command = "critical" if "critical" in exp.doc else ("sweep" if "sweep" in exp.doc else "estimate")
    if command == "estimate":
        est = crossing_probability(cfg, reps, rng, n_jobs=threads)
        return [_row(exp, "point", "", est)], {"mode": "estimate", **derived}
    if command == "sweep":
        if "sweep" not in exp.doc:
            raise ConfigError("sweep command needs a 'sweep' section")
        sw = exp.doc["sweep"]
        res = parameter_sweep(cfg, sw["axis"], sw["grid"], reps, rng, n_jobs=threads)
        rows = [_row(exp, sw["axis"], float(v), e) for v, e in zip(res.grid, res.curve)]
        meta = {"mode": "sweep", **derived}
        if res.gamma_star is not None:
            meta["gamma_star_hat"] = res.gamma_star
        return rows, meta
    if command == "critical":
        if "critical" not in exp.doc:
            raise ConfigError("critical command needs a 'critical' section")
        cr = exp.doc["critical"]
        res = find_critical(cfg, cr["axis"], tuple(cr["bracket"]), reps, rng, target=cr.get("target", 0.5),
                            tol=cr.get("tol", 0.01), n_jobs=threads)
        rows = [_row(exp, cr["axis"], float(v), e) for v, e in res.trace]
        meta = {"mode": "critical", "bracket": [res.lo, res.hi], "estimate": res.estimate,
                "warnings": res.warnings, "L": cfg.L, **derived}
        return rows, meta
    raise ValueError(f"unknown command {command!r}")


def report_bounds(exp: Experiment) -> list[tuple[str, object, str]]:
    """Every closed-form quantity applicable to the configuration.

    Each entry is ``(name, value, note)``; a bound that cannot be evaluated
    carries its error message as the note instead of aborting the report.
    """
    cfg = exp.model
    doc = exp.doc
    extra = doc.get("bounds", {})
    out: list[tuple[str, object, str]] = []

    def attempt(name, fn, note=""):
        try:
            out.append((name, fn(), note))
        except (PercsimError, ValueError, ZeroDivisionError) as exc:
            out.append((name, None, f"infeasible: {exc}"))

    if cfg.d == 2:
        lo, hi = hexagon_threshold_interval()
        out.append(("hexagon_lambda_c_lower", lo, "unit connection distance"))
        out.append(("hexagon_lambda_c_upper", hi, "unit connection distance"))
        if cfg.model in ("gilbert", "boolean_overlap", "hex_coarse"):
            attempt("hexagon_open_probability", lambda: hexagon_open_probability(cfg.lam, cfg.s), f"lam={cfg.lam}, s={cfg.s}")
    if cfg.model in ("boolean_overlap", "boolean_min", "gilbert") or cfg.marks is not None:
        law = cfg.marks if cfg.marks is not None else MarkDistribution.constant(cfg.r)
        attempt("branching_lambda0", lambda: branching_subcritical_bound(law, cfg.d).lambda0, "radii ceil(rho)")
    if cfg.model == "bond":
        attempt("peierls_bound", lambda: peierls_supercritical_bound(cfg.p), f"p={cfg.p}, sum from n=1")
        k = extra.get("n", 100)
        attempt("saw_bound", lambda: saw_subcritical_bound(cfg.p, cfg.d, k), f"(2dp)^n at n={k}")
    if cfg.pathloss is not None:
        s = cfg.sinr
        try:
            consts = interference_constants(
                cfg.pathloss, cfg.d,
                N0=s.N0 if s else None, tau=s.tau if s else None,
                P=(None if s is None or s.random_power else s.power),
                r=extra.get("r", cfg.r), M=extra.get("M"), power_level=extra.get("power_level"))
            for key in ("K0", "K0_tail", "gamma_prime", "delta", "gamma_star"):
                if key in consts:
                    val = consts[key]
                    if isinstance(val, str):
                        out.append((key, None, val))
                    else:
                        out.append((key, val, ""))
        except PercsimError as exc:
            out.append(("K0", None, f"infeasible: {exc}"))
        if s is not None:
            law = s.power if s.random_power else MarkDistribution.constant(s.power)
            try:
                chk = theta_moment_check(cfg.pathloss, law, cfg.d, s.tau, s.N0)
                out.append(("moment_radius_2d_1", chk.value, chk.label))
                out.append(("moment_alpha_beta_ok", chk.alpha_beta_ok, "tail exponent product"))
            except (PercsimError, ValueError) as exc:
                out.append(("moment_radius_2d_1", None, f"infeasible: {exc}"))
    return out


def _write(out_dir: Path, stem: str, csv_text: str, meta: dict) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    csv_path.write_text(csv_text)
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return csv_path, json_path


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="percsim", description="Continuum percolation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "estimate, sweep or bisection as the config requests"),
                        ("sweep", "crossing curve along the config's sweep grid"),
                        ("critical", "bisection for the crossing threshold"),
                        ("bounds", "closed-form bounds for the configuration")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--reps", type=int, default=None, help="override replications per estimate")
        p.add_argument("--threads", type=int, default=None, help="worker processes (default: available cores)")
        p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./results)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out or os.environ.get(OUT_ENV) or "results")
    threads = args.threads if args.threads is not None else default_jobs()
    try:
        doc = load_config(args.config)
        exp = experiment_from_doc(doc, args.seed, args.reps)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    stem = f"{Path(args.config).stem}_{args.command}"
    meta = {"config": exp.doc, "config_hash": exp.hash, "version": __version__, "command": args.command}
    t0 = time.perf_counter()
    try:
        if args.command == "bounds":
            rows = report_bounds(exp)
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["quantity", "value", "note", "config_hash"])
            for name, val, note in rows:
                shown = _fmt(val) if isinstance(val, float) else ("" if val is None else str(val))
                w.writerow([name, shown, note, exp.hash])
                print(f"{name:28s} {shown:>24s}  {note}")
            meta["bounds"] = [{"quantity": n, "value": v, "note": s} for n, v, s in rows]
            csv_text = buf.getvalue()
        else:
            rows, extra = execute(exp, args.command, threads)
            meta.update(extra)
            csv_text = _rows_to_csv(rows)
            sys.stdout.write(csv_text)
    except (PercsimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    meta["wall_time_s"] = time.perf_counter() - t0
    meta["threads"] = threads
    csv_path, json_path = _write(out_dir, stem, csv_text, meta)
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
