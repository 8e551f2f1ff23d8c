"""
Command-line interface.

Subcommands
-----------
eval      one ``(r, s)`` point
grid      a CSV table over an ``r`` x ``s`` grid
validate  CPD, oracle and branch-agreement checks for one parameter row
dimple    dimple scan for one parameter row
krige     kriging predictions from CSV data

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 validation
failures present.
"""

import argparse
import csv
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from ._quadrature import QuadratureError
from .engine import (
    CancellationWarning,
    ConvergenceError,
    DivergenceWarning,
    EvalPolicy,
    InvalidParameterError,
    ModelParams,
    gc_eval,
)
from .kriging import (
    SingularSystemError,
    build,
    predict_with_error,
    read_sites_csv,
    read_targets_csv,
    write_predictions_csv,
)
from .oracle import AnnihilationError, IntegrabilityError
from .special import PoleError
from .validation import branch_continuity, cpd_suite, dimple_scan, oracle_sweep

__all__ = ["CliConfig", "UsageError", "parse_grid", "build_parser", "run", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VALIDATION = 3

_NUMERICAL_ERRORS = (
    ConvergenceError,
    QuadratureError,
    SingularSystemError,
    IntegrabilityError,
    AnnihilationError,
    PoleError,
    ArithmeticError,
)


class UsageError(Exception):
    """Invalid command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class CliConfig:
    """Parsed and validated command line."""

    subcommand: str
    params: ModelParams
    policy: EvalPolicy
    args: argparse.Namespace


def _fmt(x):
    return f"{float(x):.17g}"


def parse_grid(text):
    """
    Parse ``lo:hi:n`` into an array.

    The grid is log-spaced when ``lo > 0`` and linear when ``lo == 0``.
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be lo:hi:n: got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"grid must be lo:hi:n with numeric lo, hi and integer n: got {text!r}") from None
    if n < 1:
        raise UsageError(f"grid size n must be >= 1: got {n}")
    if lo < 0 or hi < lo:
        raise UsageError(f"grid needs 0 <= lo <= hi: got lo={lo:g}, hi={hi:g}")
    if n == 1:
        return np.array([lo])
    if lo > 0:
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _add_model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--alpha1", type=float, required=True, help="spectral exponent alpha1 >= 1")
    g.add_argument("--nu", type=float, required=True, help="spectral decay nu")
    g.add_argument("--d1", type=int, default=1, help="spatial dimension (default: 1)")
    g.add_argument("--d2", type=int, default=1, help="temporal dimension (default: 1)")
    g.add_argument("--b1", type=float, default=1.0, help="spatial scale (default: 1)")
    g.add_argument("--b2", type=float, default=1.0, help="temporal scale (default: 1)")
    d = EvalPolicy()
    g = p.add_argument_group("evaluation policy")
    g.add_argument("--rel-tol", type=float, default=d.rel_tol, help=f"(default: {d.rel_tol:g})")
    g.add_argument("--max-terms", type=int, default=d.max_terms, help=f"(default: {d.max_terms})")
    g.add_argument("--z-crossover", type=float, default=d.z_crossover,
                   help=f"series/asymptotic switch in z (default: {d.z_crossover:g})")
    g.add_argument("--singular-guard", type=float, default=d.singular_guard,
                   help=f"(default: {d.singular_guard:g})")
    g.add_argument("--perturb-eps", type=float, default=d.perturb_eps,
                   help=f"(default: {d.perturb_eps:g})")


def build_parser():
    parser = _Parser(prog="spacetime-gc", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="evaluate G at one (r, s)")
    _add_model_args(p)
    p.add_argument("--r", type=float, required=True, help="spatial lag norm")
    p.add_argument("--s", type=float, required=True, help="temporal lag norm")

    p = sub.add_parser("grid", help="evaluate G on a grid and write CSV")
    _add_model_args(p)
    p.add_argument("--r-grid", required=True, help="lo:hi:n (log-spaced if lo > 0)")
    p.add_argument("--s-grid", required=True, help="lo:hi:n (log-spaced if lo > 0)")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("validate", help="run CPD, oracle and branch-agreement checks")
    _add_model_args(p)
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--configs", type=int, default=200, help="CPD configurations (default: 200)")
    p.add_argument("--oracle-points", type=int, default=4,
                   help="oracle separations per axis (default: 4)")
    p.add_argument("--out", help="report CSV path")

    p = sub.add_parser("dimple", help="scan for dimples (k0 = 0 only)")
    _add_model_args(p)
    p.add_argument("--r-grid", default="0:10:50", help="lo:hi:n (default: 0:10:50)")
    p.add_argument("--s-grid", default="0:10:50", help="lo:hi:n (default: 0:10:50)")
    p.add_argument("--out", help="report CSV path")

    p = sub.add_parser("krige", help="kriging predictions from CSV data")
    _add_model_args(p)
    p.add_argument("--data", required=True, help="CSV x1..xd1,y1..yd2,value")
    p.add_argument("--targets", required=True, help="CSV x1..xd1,y1..yd2")
    p.add_argument("--out", required=True, help="output CSV path")
    return parser


def parse(argv):
    """Parse ``argv`` into a :class:`CliConfig`, validating the model first."""
    args = build_parser().parse_args(argv)
    try:
        params = ModelParams(args.alpha1, args.nu, args.d1, args.d2, args.b1, args.b2)
        policy = EvalPolicy(
            rel_tol=args.rel_tol,
            max_terms=args.max_terms,
            z_crossover=args.z_crossover,
            singular_guard=args.singular_guard,
            perturb_eps=args.perturb_eps,
        )
    except InvalidParameterError as exc:
        raise UsageError(str(exc)) from None
    return CliConfig(args.subcommand, params, policy, args)


def _cmd_eval(cfg, out):
    a = cfg.args
    if a.r < 0 or a.s < 0:
        raise UsageError(f"lag norms must be nonnegative: got r={a.r:g}, s={a.s:g}")
    g = gc_eval(a.r, a.s, cfg.params, cfg.policy)
    out.write(f"value    {_fmt(g.value)}\n")
    out.write(f"branch   {g.branch.value}\n")
    out.write(f"err_est  {_fmt(g.err_est)}\n")
    out.write(f"terms    {g.terms}\n")
    return EXIT_OK


def _cmd_grid(cfg, out):
    a = cfg.args
    rs = parse_grid(a.r_grid)
    ss = parse_grid(a.s_grid)
    rows = []
    for r in rs:
        for s in ss:
            g = gc_eval(float(r), float(s), cfg.params, cfg.policy)
            rows.append((r, s, g))
    with open(a.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "s", "value", "branch", "err_est"])
        for r, s, g in rows:
            w.writerow([_fmt(r), _fmt(s), _fmt(g.value), g.branch.value, _fmt(g.err_est)])
    out.write(f"wrote {len(rows)} rows to {a.out}\n")
    return EXIT_OK


def _report(report, path, out):
    if path:
        report.to_csv(path)
    out.write(report.summary())
    return EXIT_OK if report.all_passed else EXIT_VALIDATION


def _oracle_grid(params, n):
    if params.k0 == 0:
        t = np.geomspace(1e-2, 10.0, n)
        return [(float(r), float(s)) for r in t for s in t]
    t = np.geomspace(0.1, 3.0, n)
    return [(float(x), float(0.7 * x)) for x in t]


def _cmd_validate(cfg, out):
    a = cfg.args
    if a.configs < 1:
        raise UsageError(f"--configs must be >= 1: got {a.configs}")
    if a.oracle_points < 1:
        raise UsageError(f"--oracle-points must be >= 1: got {a.oracle_points}")
    unit = cfg.params.unit_scale()
    report = cpd_suite(cfg.params, a.configs, seed=a.seed, policy=cfg.policy)
    report.extend(oracle_sweep([unit], _oracle_grid(unit, a.oracle_points), cfg.policy))
    report.extend(branch_continuity([unit], cfg.policy, strict_overlap=False))
    return _report(report, a.out, out)


def _cmd_dimple(cfg, out):
    a = cfg.args
    if cfg.params.k0 != 0:
        raise UsageError(f"dimple scan needs k0 = 0: got k0={cfg.params.k0}")
    report = dimple_scan(cfg.params, parse_grid(a.r_grid), parse_grid(a.s_grid), cfg.policy)
    return _report(report, a.out, out)


def _cmd_krige(cfg, out):
    a = cfg.args
    p = cfg.params
    try:
        sites, values, d1, d2 = read_sites_csv(a.data)
        targets, t1, t2 = read_targets_csv(a.targets)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if (d1, d2) != (p.d1, p.d2) or (t1, t2) != (p.d1, p.d2):
        raise UsageError(
            f"CSV dimensions must match --d1 {p.d1} --d2 {p.d2}: "
            f"data has ({d1}, {d2}), targets have ({t1}, {t2})"
        )
    try:
        system = build(sites, values, p, cfg.policy)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    mean, err = predict_with_error(system, targets)
    write_predictions_csv(a.out, targets, mean, err, d1, d2)
    out.write(f"condition {system.condition:.6g}\n")
    out.write(f"wrote {len(mean)} predictions to {a.out}\n")
    return EXIT_OK


_COMMANDS = {
    "eval": _cmd_eval,
    "grid": _cmd_grid,
    "validate": _cmd_validate,
    "dimple": _cmd_dimple,
    "krige": _cmd_krige,
}


def run(argv=None, out=None, err=None):
    """Run the command line ``argv`` and return the exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        cfg = parse(sys.argv[1:] if argv is None else list(argv))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", CancellationWarning)
            warnings.simplefilter("always", DivergenceWarning)
            code = _COMMANDS[cfg.subcommand](cfg, out)
        seen = set()
        for w in caught:
            if issubclass(w.category, (CancellationWarning, DivergenceWarning)):
                msg = f"warning: {w.category.__name__}: {w.message}"
                if msg not in seen:
                    seen.add(msg)
                    err.write(msg + "\n")
        return code
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except InvalidParameterError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        err.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL
    except OSError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE


def main():
    sys.exit(run())
