"""Command-line entry point: ``kirchhoff-qp {solve,diagnose,scan}``.

Exit codes: 0 success, 1 usage or configuration error, 2 mathematical
failure (bad parameter, failed step, no convergence).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .config import load_config
from .errors import BadParameter, ConfigError, KirchhoffError, StepFailed
from .fourier import TorusFunction, s0_of, sobolev_norm
from .kirchhoff import collocation_residual, recover_v0
from .measure_scan import ScanSettings, fitted_exponent, scan_lambda, write_csv
from .multiscale import diagnose
from .nash_moser import check_exponents, solve

log = logging.getLogger("kirchhoff_qp")

EXIT_OK, EXIT_CONFIG, EXIT_MATH = 0, 1, 2


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, (tuple, set, np.ndarray)):
        return list(o)
    raise TypeError(f"not serialisable: {type(o)}")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _prepare(args):
    cfg = load_config(args.config)
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    pd = cfg.problem()
    es = cfg.exponent_set(pd.nu)
    ok, violated = check_exponents(es)
    if not ok and not args.override_exponents:
        raise ConfigError("exponents violate: " + "; ".join(violated))
    os.makedirs(args.out, exist_ok=True)
    return cfg, pd, es


def cmd_solve(args):
    cfg, pd, es = _prepare(args)
    stamp = cfg.stamp()
    trace_path = os.path.join(args.out, "trace.jsonl")
    status, message, trace, u = "converged", "", [], None
    t0 = time.perf_counter()
    with open(trace_path, "w") as fh:
        fh.write(json.dumps({"header": True, **stamp}, sort_keys=True) + "\n")

        def cb(state):
            fh.write(json.dumps(state.record(), sort_keys=True, default=_json_default) + "\n")
            log.info("step %d  residual %.3e", state.n, state.residual_s0)

        try:
            u, trace = solve(pd, cfg.lam, es=es, N0=cfg.N0, max_steps=cfg.max_steps,
                             tol=cfg.tol, box=cfg.box, override=args.override_exponents,
                             callback=cb)
            if trace[-1].residual_s0 > cfg.tol:
                status, message = "not_converged", "max_steps reached"
        except (BadParameter, StepFailed) as e:
            status, message = type(e).__name__, str(e)
            trace = getattr(e, "trace", [])
    wall = time.perf_counter() - t0
    out = {**stamp, "status": status, "message": message, "lambda": cfg.lam,
           "epsilon": pd.epsilon, "steps": len(trace) - 1 if trace else 0,
           "wall_s": wall}
    if u is not None:
        s0 = s0_of(pd.nu, pd.d)
        out["residual_s0"] = trace[-1].residual_s0
        out["norm_s0"] = sobolev_norm(u, s0)
        v0 = recover_v0(pd, cfg.lam)
        out["u"] = u.to_dict()
        out["v0"] = v0.to_dict()
        if (pd.nu, pd.d) == (1, 1):
            box = (max(u.box[0], v0.box[0]), max(u.box[1], v0.box[1]))
            v = u.resize(box) + v0.resize(box)
            out["collocation_residual"] = collocation_residual(pd, cfg.lam, v)
    _write_json(os.path.join(args.out, "solution.json"), out)
    lines = [f"kirchhoff-qp {__version__}  config {stamp['config_hash'][:12]}",
             f"lambda = {cfg.lam}  epsilon = {pd.epsilon}  box = {cfg.box}",
             f"status: {status} {message}".rstrip()]
    for st in trace:
        lines.append(f"  n={st.n:2d}  N={st.N_n:10.3g}  residual_s0={st.residual_s0:.3e}"
                     f"  {' '.join(st.warnings)}")
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if status == "converged" else EXIT_MATH


def cmd_diagnose(args):
    cfg, pd, es = _prepare(args)
    dg = dict(cfg.diagnose)
    lam = args.lam if args.lam is not None else dg.get("lambda", cfg.lam)
    theta = args.theta if args.theta is not None else dg.get("theta", 0.0)
    N = args.N if args.N is not None else dg.get("N", 4)
    u = None
    try:
        u, _ = solve(pd, lam, es=es, N0=cfg.N0, max_steps=cfg.max_steps, tol=cfg.tol,
                     box=cfg.box, override=args.override_exponents)
        converged = True
    except (BadParameter, StepFailed) as e:
        log.warning("solver failed (%s); diagnosing at u = 0", e)
        converged = False
    if u is None:
        u = TorusFunction(pd.nu, pd.d, cfg.box)
    rep = diagnose(pd, lam, u, theta, N, j0=dg.get("j0"), Gamma=dg.get("Gamma"),
                   C1=dg.get("C1", 2.0), tau1=dg.get("tau1", 2.0))
    rep = {**cfg.stamp(), **rep, "solver_converged": converged}
    _write_json(os.path.join(args.out, "diagnose.json"), rep)
    print(f"n_singular={rep['n_singular']} max_chain_len={rep['max_chain_len']} "
          f"clusters={len(rep['clusters'])} separation_ok={rep['separation_ok']} "
          f"bad_theta_intervals={len(rep['bad_theta_intervals'])}")
    return EXIT_OK


def scan_settings(cfg):
    sc = cfg.scan
    keys = {"N_list", "tau1", "tau0", "N_bar", "tilde_coeff", "theta_factor",
            "j0_report", "box", "check_G0", "solver_N0", "max_steps", "tol"}
    return ScanSettings(**{k: v for k, v in sc.items() if k in keys})


def cmd_scan(args):
    cfg, pd, es = _prepare(args)
    sc = cfg.scan
    grid = np.linspace(sc.get("lambda_min", 0.5), sc.get("lambda_max", 1.5),
                       int(sc.get("n_lambda", 200)))
    settings = scan_settings(cfg)
    epsilons = sc.get("epsilons") or (pd.epsilon,)
    stamp = cfg.stamp()
    reports = []
    for eps in epsilons:
        t0 = time.perf_counter()
        rep = scan_lambda(pd.with_epsilon(eps), es, grid, settings, threads=cfg.threads)
        log.info("epsilon %g: bad_fraction %.4f (%.1f s)", eps, rep.bad_fraction,
                 time.perf_counter() - t0)
        reports.append(rep)
    header = [f"config_hash={stamp['config_hash']}", f"version={stamp['version']}"]
    with open(os.path.join(args.out, "scan.csv"), "w", newline="") as fh:
        write_csv(reports, fh, header=header)
    results = [r.summary() for r in reports]
    summary = {**stamp, "results": results,
               "bad_fraction": {repr(float(r["epsilon"])): r["bad_fraction"] for r in results},
               "fitted_exponent": fitted_exponent([r["epsilon"] for r in results],
                                                  [r["bad_fraction"] for r in results]),
               "settings": {k: v for k, v in vars(reports[0].settings).items()}}
    _write_json(os.path.join(args.out, "summary.json"), summary)
    for r in results:
        print(f"epsilon={r['epsilon']:g} bad_fraction={r['bad_fraction']:.4f} "
              f"({r['n_bad']}/{r['n_lambda']})")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="kirchhoff-qp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="INI configuration file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--override-exponents", action="store_true",
                        help="run even if the exponent inequalities fail")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="Nash-Moser solve at one lambda")
    d = sub.add_parser("diagnose", parents=[common], help="multiscale diagnostic report")
    d.add_argument("--lambda", dest="lam", type=float, default=None)
    d.add_argument("--theta", type=float, default=None)
    d.add_argument("--N", type=int, default=None)
    sub.add_parser("scan", parents=[common], help="lambda-grid classification")
    return p


COMMANDS = {"solve": cmd_solve, "diagnose": cmd_diagnose, "scan": cmd_scan}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KirchhoffError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())
