"""Batch command-line front end.

Every command writes its CSV files and a ``manifest.json`` into ``--out-dir``.
Settings come from flags, optionally on top of an INI file given with
``--config`` whose ``[fracsad]`` section uses the flag names as keys
(``hurst = 0.7``, ``out-dir = runs/a``); flags win over the file.

Exit codes: 0 success, 1 acceptance failure, 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import __version__
from .errors import DomainError, MethodError, NumericError, ResolutionError
from .fbm import TimeGrid
from .gausscov import covariance_report
from .io import RunManifest
from .kernel import ModelParams, weight_table
from .localtime import (analytic_mean_local_time, analytic_mean_weighted_local_time, estimate_local_time,
                        estimate_weighted_local_time, tanaka_report, write_local_time_csv, write_tanaka_csv)
from .silt import (IncrementVarianceTable, SiltEstimate, analytic_mean_beta, analytic_var_beta, beta_samples,
                   cauchy_shrinking, convergence_study, write_convergence_csv, write_silt_csv)
from .simulate import SIMULATORS, moment_report, simulate
from .verify import TIERS, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

WICK_ASSUMPTION = "the divergence-type stochastic integral of sign(X_s - x) has zero mean"

DEFAULTS = {
    "a": 1.0, "nu": 0.0, "z": 0.0, "hurst": 0.6, "T": 1.0, "steps": 256, "paths": 1000, "seed": 0,
    "eps": None, "out_dir": ".", "threads": 1, "method": "representation", "d": 1, "x": None, "t": None,
}
_FLOATS = {"a", "nu", "z", "hurst", "T"}
_INTS = {"steps", "paths", "seed", "threads", "d"}
_LISTS = {"eps", "x", "t"}


class UsageError(Exception):
    pass


def _float_list(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [fracsad] section of flag defaults")
    common.add_argument("--a", type=float, help="attraction strength (>= 0)")
    common.add_argument("--nu", type=float, help="constant drift")
    common.add_argument("--z", type=float, help="starting point")
    common.add_argument("--hurst", "--H", dest="hurst", type=float, help="Hurst index in (1/2, 1)")
    common.add_argument("--T", type=float, help="time horizon")
    common.add_argument("--steps", type=int, help="grid steps on [0, T]")
    common.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--eps", type=_float_list, help="bandwidth / regularization list, e.g. '0.2,0.1'")
    common.add_argument("--out-dir", dest="out_dir", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for path generation")

    parser = argparse.ArgumentParser(prog="fracsad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="simulate paths and moments")
    p.add_argument("--method", choices=sorted(SIMULATORS))
    p.add_argument("--d", type=int, help="dimension (1 or 2)")
    sub.add_parser("covariance", parents=[common], help="variance, increment variance and cross covariance table")
    p = sub.add_parser("localtime", parents=[common], help="local time estimates against expectations")
    p.add_argument("--x", type=_float_list, help="levels")
    p = sub.add_parser("tanaka", parents=[common], help="Tanaka identity in expectation")
    p.add_argument("--x", type=_float_list, help="levels")
    p.add_argument("--t", type=_float_list, help="times")
    sub.add_parser("silt", parents=[common], help="self-intersection local time moments")
    sub.add_parser("silt-converge", parents=[common], help="variance of the regularized SILT along eps")
    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--quick", dest="tier", action="store_const", const="quick")
    g.add_argument("--full", dest="tier", action="store_const", const="full")
    p.set_defaults(tier="quick")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags, in that order of precedence."""
    cfg = dict(DEFAULTS)
    if args.config:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep 'T' (horizon) distinct from 't' (times)
        if not parser.read(args.config):
            raise UsageError(f"cannot read config file {args.config}")
        if "fracsad" not in parser:
            raise UsageError("config file needs a [fracsad] section")
        for key, raw in parser["fracsad"].items():
            k = key.replace("-", "_")
            if k not in cfg:
                raise UsageError(f"unknown config key {key!r}")
            try:
                cfg[k] = (float(raw) if k in _FLOATS else int(raw) if k in _INTS
                          else _float_list(raw) if k in _LISTS else raw)
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {raw!r}") from exc
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _params(cfg, d=1) -> ModelParams:
    return ModelParams(a=cfg["a"], nu=cfg["nu"], z=cfg["z"], H=cfg["hurst"], T=cfg["T"], d=d)


def _manifest(command, cfg, out_dir, files, assumptions=()):
    m = RunManifest(command, {k: v for k, v in cfg.items()}, int(cfg["seed"]), __version__,
                    assumptions=list(assumptions))
    for f in files:
        m.add_output(f)
    m.write(out_dir)


def _driftless(cfg, what):
    if cfg["nu"] != 0:
        raise UsageError(f"{what} requires --nu 0")


def cmd_simulate(cfg, out):
    p = _params(cfg, cfg["d"])
    grid = TimeGrid.uniform(cfg["T"], cfg["steps"])
    paths = simulate(cfg["method"], p, grid, cfg["paths"], cfg["seed"], threads=cfg["threads"])
    files = [paths.to_csv(os.path.join(out, "paths.csv"))]
    for dim in range(p.d):
        files.append(moment_report(paths, dim).to_csv(os.path.join(out, f"moments_dim{dim}.csv")))
    return files, ()


def cmd_covariance(cfg, out):
    rep = covariance_report(TimeGrid.uniform(cfg["T"], cfg["steps"]), _params(cfg))
    return [rep.to_csv(os.path.join(out, "covariance.csv"))], ()


def cmd_localtime(cfg, out):
    _driftless(cfg, "localtime")
    p = _params(cfg)
    grid = TimeGrid.uniform(cfg["T"], cfg["steps"])
    paths = simulate("representation", p, grid, cfg["paths"], cfg["seed"], threads=cfg["threads"])
    W = weight_table(grid, p)
    levels = cfg["x"] or [cfg["z"]]
    bands = cfg["eps"] or [0.1]
    plain, weighted = [], []
    for x in levels:
        m1 = analytic_mean_local_time(p.T, x, p)
        m2 = analytic_mean_weighted_local_time(p.T, x, p)
        for b in bands:
            plain.append((estimate_local_time(paths, x, p.T, b), m1))
            weighted.append((estimate_weighted_local_time(paths, x, p.T, b, W), m2))
    return [write_local_time_csv(os.path.join(out, "localtime.csv"), plain),
            write_local_time_csv(os.path.join(out, "weighted_localtime.csv"), weighted)], ()


def cmd_tanaka(cfg, out):
    _driftless(cfg, "tanaka")
    p = _params(cfg)
    times = cfg["t"] or [0.5 * p.T, p.T]
    levels = cfg["x"] or [p.z, p.z + 0.5]
    reports = [tanaka_report(t, x, p) for t in times for x in levels]
    for r in reports:
        print(f"t={r.t:g} x={r.x:g} residual={r.residual:.3e} (tolerance {1e-3 * r.E_abs:.3e})")
    return [write_tanaka_csv(os.path.join(out, "tanaka.csv"), reports)], (WICK_ASSUMPTION,)


def cmd_silt(cfg, out):
    _driftless(cfg, "silt")
    p2 = _params(cfg, 2)
    p1 = _params(cfg, 1)
    grid = TimeGrid.uniform(cfg["T"], cfg["steps"])
    eps = cfg["eps"] or [0.5, 0.2, 0.1]
    paths = simulate("representation", p2, grid, cfg["paths"], cfg["seed"], threads=cfg["threads"])
    table = IncrementVarianceTable(p1)
    rows = []
    for e, b in zip(eps, beta_samples(paths, eps)):
        var = float(b.var(ddof=1))
        m4 = float(np.mean((b - b.mean()) ** 4))
        rows.append(SiltEstimate(e, float(b.mean()), var, float(b.std(ddof=1) / np.sqrt(b.size)),
                                 float(np.sqrt(max(m4 - var * var, 0.0) / b.size)),
                                 analytic_mean_beta(e, p1, table=table),
                                 max(analytic_var_beta(e, p1, table=table).value, 0.0), b.size, grid.n_steps))
    return [write_silt_csv(os.path.join(out, "silt.csv"), rows)], ()


def cmd_silt_converge(cfg, out):
    p = _params(cfg)
    eps = cfg["eps"] or [0.4, 0.2, 0.1, 0.05, 0.025]
    rows = convergence_study(eps, p)
    state = "shrinking" if cauchy_shrinking(rows) else "not shrinking"
    print(f"H={p.H}: successive differences {state}")
    for r in rows:
        print(f"  eps={r.epsilon:g} var={r.analytic_var:.6g} +- {r.error:.2g} delta={r.delta_prev:.4g}")
    return [write_convergence_csv(os.path.join(out, "silt_converge.csv"), rows)], ()


def cmd_verify(cfg, out, tier):
    checks = run_suite(TIERS[tier], threads=cfg["threads"], out_dir=out)
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    files = sorted(os.path.join(out, f) for f in os.listdir(out) if f.endswith(".csv"))
    return files, (WICK_ASSUMPTION,), (EXIT_FAIL if failed else EXIT_OK)


COMMANDS = {"simulate": cmd_simulate, "covariance": cmd_covariance, "localtime": cmd_localtime,
            "tanaka": cmd_tanaka, "silt": cmd_silt, "silt-converge": cmd_silt_converge}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = resolve(args)
        out = cfg["out_dir"]
        os.makedirs(out, exist_ok=True)
        status = EXIT_OK
        if args.command == "verify":
            files, assumptions, status = cmd_verify(cfg, out, args.tier)
        else:
            files, assumptions = COMMANDS[args.command](cfg, out)
        _manifest(args.command, cfg, out, files, assumptions)
        return status
    except (UsageError, DomainError, MethodError, ResolutionError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc} (estimate={exc.estimate}, error={exc.error})", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
