"""Command-line entry point: ``certlab <command> [--config PATH] [--seed N] ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from . import experiments as ex
from . import gaussian as gw
from . import regularizers as reg
from . import solvers
from .certificates import zero_split
from .losses import QuadraticLoss

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("solve", "certify", "width", "phase", "oracle-audit", "mixed-demo", "matcomp-demo", "glm-bound")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors already; keep the message on stderr
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"certlab: error: {message}\n")
        sys.exit(EXIT_CONFIG)


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config (schema_version 1)")
    common.add_argument("--seed", type=_u64, help="master seed (u64)")
    common.add_argument("--out", metavar="DIR", help="output directory; tables go to stdout when omitted")
    common.add_argument("--trials", type=int, help="trial count override")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, help="worker processes (0 = one per CPU)")
    p = _Parser(prog="certlab", description="Certificate-based recovery experiments.")
    p.add_argument("--version", action="version", version=f"certlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def _overrides(args, command):
    return {"seed": args.seed, "trials": args.trials, "workers": args.workers}


def _emit(text, out_dir, name):
    if out_dir is None:
        sys.stdout.write(text)
        return None
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _meta(cfg, out_dir, name, extra):
    if out_dir is None:
        return
    meta = {"certlab_version": __version__, "seed": cfg.seed, "config": json.loads(cfg.to_json())}
    meta.update(extra)
    with open(os.path.join(out_dir, f"{name}.meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _table(rows, fmt):
    return ex.records_to_json(rows) if fmt == "json" else ex.records_to_csv(rows, list(rows[0].keys()))


def cmd_solve(cfg, args):
    """One seeded regularized least-squares instance."""
    rng = np.random.default_rng(ex.derive_seed(cfg.seed, cfg.n, 0))
    if cfg.regularizer == "nuclear":
        p1, p2 = cfg.shape
        b = rng.standard_normal((p1, cfg.rank)) @ rng.standard_normal((cfg.rank, p2))
        X = rng.standard_normal((cfg.n, p1 * p2))
        R1 = reg.nuclear(1.0, (p1, p2))
        L = QuadraticLoss(X, X @ b.ravel() + cfg.sigma * rng.standard_normal(cfg.n), (p1, p2))
    elif cfg.regularizer == "mixed":
        G = reg.GroupStructure.contiguous(cfg.p // cfg.m, cfg.m)
        b, _ = ex._signal(rng, cfg.model_copy(update={"regularizer": "lasso"}), cfg.p)
        X = rng.standard_normal((cfg.n, cfg.p))
        L = QuadraticLoss(X, X @ b + cfg.sigma * rng.standard_normal(cfg.n))
        lam1, lamg = ex.mixed_lambdas(cfg, cfg.n)
        R1 = reg.mixed(lam1, lamg, G)
    else:
        b, G = ex._signal(rng, cfg, cfg.p)
        X = rng.standard_normal((cfg.n, cfg.p))
        L = QuadraticLoss(X, X @ b + cfg.sigma * rng.standard_normal(cfg.n))
        R1 = ex._reg(cfg, 1.0, G)
    if cfg.regularizer == "mixed":
        R = R1
    else:
        R = R1.scaled(ex.oracle_lambda(cfg, L, R1, b))
    res = solvers.solve_regularized(L, R)
    row = {"n": cfg.n, "p": int(np.prod(L.shape)), "regularizer": cfg.regularizer, "lam": R.lam,
           "status": res.status, "iterations": res.iterations, "objective": res.objective, "kkt": res.kkt,
           "rel_err_l2": ex._rel(res.beta, b)}
    _emit(_table([row], args.format), args.out, f"solve.{args.format}")
    _meta(cfg, args.out, "solve", {})
    return EXIT_OK if res.status in ("converged", "stalled") else EXIT_NUMERIC


def cmd_width(cfg, args):
    """Monte Carlo width and closed-form bound for the planted lasso/group frame."""
    if cfg.regularizer not in ("lasso", "group"):
        raise ex.ConfigError("field 'regularizer': width supports lasso and group")
    rng = np.random.default_rng(ex.derive_seed(cfg.seed, cfg.p, 0))
    b, G = ex._signal(rng, cfg, cfg.p)
    R = ex._reg(cfg, 1.0, G)
    F = reg.certificate_frame(R, b, cfg.eta) if cfg.s > 0 else reg.trivial_frame(R)
    est = gw.width_mc(F, zero_split(F), cfg.trials, cfg.seed)
    row = {"p": cfg.p, "s": cfg.s, "eta": cfg.eta, "trials": est.trials, "mc_mean": est.mean, "mc_se": est.se,
           "mc_sq_mean": est.sq_mean, "mc_sq_se": est.sq_se}
    if cfg.s > 0:
        q = cfg.p // cfg.m if cfg.regularizer == "group" else cfg.p
        if q >= 2 * cfg.s:
            # ‖sgn(β̄)‖² = |S| for ±1 signs and unit-norm groups
            if cfg.regularizer == "group":
                wb = gw.width_bound_group(cfg.s, q, cfg.m, cfg.eta, 0.0, float(cfg.s))
            else:
                wb = gw.width_bound_lasso(cfg.s, cfg.p, cfg.eta, 0.0, float(cfg.s))
            row["bound_sq"] = wb
            row["gordon_n"] = gw.sample_complexity(np.sqrt(wb), cfg.alpha)
    else:
        row["lambda_p"] = gw.lambda_n(cfg.p)
    _emit(_table([row], args.format), args.out, f"width.{args.format}")
    _meta(cfg, args.out, "width", {})
    return EXIT_OK


def cmd_experiment(kind, cfg, args):
    result, paths = ex.run_experiment(kind, cfg, args.out, args.format)
    if args.out is None:
        if isinstance(result, ex.PhaseResult):
            cols = ["n", "trials", "successes", "rate", "pred_success_lower", "gordon_n", "width_bound"]
            text = ex.records_to_json(result.table) if args.format == "json" else ex.records_to_csv(result.table, cols)
        else:
            text = ex.records_to_json(result) if args.format == "json" else ex.records_to_csv(result)
        sys.stdout.write(text)
    recs = result.records if isinstance(result, ex.PhaseResult) else result
    failed = [r for r in recs if r.status == "error"]
    if failed:
        sys.stderr.write(f"certlab: {len(failed)} of {len(recs)} trials failed numerically\n")
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        cfg = ex.load_config(args.config, _overrides(args, command))
        if cfg.experiment is not None and command in ex.EXPERIMENTS and cfg.experiment != command:
            raise ex.ConfigError(f"field 'experiment': config is for {cfg.experiment!r}, not {command!r}")
        if command == "solve":
            return cmd_solve(cfg, args)
        if command == "width":
            return cmd_width(cfg, args)
        return cmd_experiment(command, cfg, args)
    except ex.ConfigError as exc:
        sys.stderr.write(f"certlab: config error: {exc}\n")
        return EXIT_CONFIG
    except (ex.NumericalFailure, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        sys.stderr.write(f"certlab: numerical failure: {exc}\n")
        return EXIT_NUMERIC
