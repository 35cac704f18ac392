"""Command-line interface: ``mable-ph {fit,select-degree,curve,simulate}``.

Exit status is 0 on success, 1 on bad input and 2 when a fit does not
converge (a partial report is still written in that case).
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataio import format_report, model_from_report, read_observations
from .degree_selection import DegreeGrid, changepoint_select, profile_loglik_grid
from .errors import DegenerateError, NonConvergenceError
from .model import BernsteinPHModel
from .optimizer import FitConfig, FitReport, mable_fit
from .simulation import METHODS, SimDesign, mse_report

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGED = 2

log = logging.getLogger("mable_ph")


class InputError(Exception):
    pass


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()], dtype=float)
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text: str) -> DegreeGrid:
    try:
        lo, hi = (int(v) for v in text.split(":"))
        return DegreeGrid.from_bounds(lo, hi)
    except ValueError as exc:
        raise InputError(f"--grid must look like m0:mk with mk - m0 >= 2 ({exc})") from None


def _time_grid(text: str) -> np.ndarray:
    """``start:stop:num`` (inclusive, evenly spaced) or a comma list."""
    if ":" in text:
        try:
            a, b, k = text.split(":")
            return np.linspace(float(a), float(b), int(k))
        except ValueError:
            raise InputError(f"--times must be start:stop:num, got {text!r}") from None
    return _floats(text)


def _config(args) -> FitConfig:
    base = FitConfig()
    try:
        return FitConfig(
            p_tol=args.p_tol if args.p_tol is not None else base.p_tol,
            gamma_tol=args.gamma_tol if args.gamma_tol is not None else base.gamma_tol,
            max_outer_iters=args.max_outer if args.max_outer is not None else base.max_outer_iters,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _tail(args) -> Optional[bool]:
    return {"auto": None, "on": True, "off": False}[args.tail]


def _load(args):
    if not args.input:
        raise InputError("--input is required")
    return read_observations(args.input, args.tau)


def _write(path: Optional[str], text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _gamma_init(args, d):
    if args.gamma_init is None:
        return None
    g = _floats(args.gamma_init)
    if len(g) != d:
        raise InputError(f"--gamma-init has {len(g)} values but the data have {d} covariates")
    return g


# fit ------------------------------------------------------------------------------

def fit_report_text(model: BernsteinPHModel, report: FitReport, dataset, status: str) -> str:
    header = {
        "format": "mable-ph fit report",
        "status": status,
        "m": model.m,
        "has_tail": model.has_tail,
        "tau": model.tau,
        "tau_known": dataset.tau_known,
        "n": dataset.n,
        "d": model.d,
        "loglik": report.loglik,
        "kkt_residual": report.kkt_residual,
        "outer_iters": report.outer_iters,
        "fixed_point_iters": report.fixed_point_iters,
        "newton_iters": report.newton_iters,
        "rebases": report.rebases,
    }
    blocks = {}
    if model.d:
        header["x0_index"] = report.x0_index
        se = report.standard_errors
        rows = [(j + 1, g, float("nan") if se is None else se[j]) for j, g in enumerate(model.gamma)]
        blocks["gamma"] = (["j", "estimate", "se"], rows)
        blocks["x0"] = (["j", "value"], [(j + 1, v) for j, v in enumerate(model.x0)])
    blocks["p"] = (["i", "weight"], [(i, v) for i, v in enumerate(model.p)])
    return format_report(header, blocks)


def cmd_fit(args) -> int:
    ds = _load(args)
    if (args.degree is None) == (args.grid is None):
        raise InputError("give exactly one of --degree or --grid")
    config = _config(args)
    gamma0 = _gamma_init(args, ds.d)
    if args.degree is not None:
        try:
            model, report = mable_fit(ds, args.degree, gamma0, config, _tail(args))
        except NonConvergenceError as exc:
            rep = exc.report or FitReport()
            model = exc.last if isinstance(exc.last, BernsteinPHModel) else None
            if model is not None:
                _write(args.output, fit_report_text(model, rep, ds, "not-converged"))
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
    else:
        table = profile_loglik_grid(ds, _grid(args.grid), config, "full", has_tail=_tail(args))
        m_hat = changepoint_select(table)
        model = table.model_at(m_hat)
        report = table.reports[int(np.flatnonzero(table.degrees == m_hat)[0])]
    _write(args.output, fit_report_text(model, report, ds, "converged"))
    return EXIT_OK


# select-degree --------------------------------------------------------------------

def cmd_select_degree(args) -> int:
    ds = _load(args)
    grid = _grid(args.grid) if args.grid else DegreeGrid()
    config = _config(args)
    gamma_tilde = _gamma_init(args, ds.d)
    if args.mode == "profile" and gamma_tilde is None and ds.d:
        # a full fit at the top of the grid supplies gamma-tilde
        top = int(grid.degrees[-1])
        gamma_tilde = mable_fit(ds, top, None, config, _tail(args))[0].gamma
    table = profile_loglik_grid(ds, grid, config, args.mode, gamma_tilde, _tail(args))
    try:
        m = changepoint_select(table)
    except DegenerateError as exc:
        # the table is still the useful output: a flat likelihood says any grid degree fits
        _write(args.output, table.to_csv())
        print(f"no change point: {exc}", file=sys.stderr)
        return EXIT_OK
    _write(args.output, table.to_csv())
    print(f"selected degree: {m}", file=sys.stderr)
    return EXIT_OK


# curve ------------------------------------------------------------------------------

def cmd_curve(args) -> int:
    if not args.report:
        raise InputError("--report is required")
    model = model_from_report(Path(args.report).read_text())
    times = _time_grid(args.times) if args.times else np.linspace(0.0, model.tau, 101)
    if np.any(times < 0):
        raise InputError("times must be nonnegative")
    if args.covariates:
        rows = [_floats(part) for part in args.covariates.split(";")]
    else:
        rows = [model.x0.copy()]
    for j, x in enumerate(rows):
        if len(x) != model.d:
            raise InputError(f"covariate row {j + 1} has {len(x)} values, the fit has {model.d}")
    lines = ["t,x_id,survival,density"]
    for j, x in enumerate(rows):
        s = np.atleast_1d(model.conditional_survival(times, x))
        f = np.atleast_1d(model.conditional_density(times, x))
        lines.extend(f"{t!r},{j + 1},{float(a)!r},{float(b)!r}" for t, a, b in zip(times.tolist(), s, f))
    _write(args.output, "\n".join(lines) + "\n")
    return EXIT_OK


# simulate ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    try:
        design = SimDesign(
            n=args.n, replicates=args.replicates, seed=args.seed, inspections=args.inspections,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.replicates < 1:
        raise InputError("--replicates must be at least 1")
    grid = _grid(args.grid) if args.grid else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = mse_report(design, methods, _config(args), grid)
    _write(args.output, report.table_csv())
    if args.curve_output:
        _write(args.curve_output, report.curve_csv())
    return EXIT_OK


# argument parsing -------------------------------------------------------------------

def _fit_flags(p):
    p.add_argument("--input", help="observations CSV (y1,y2,delta,x1..xd)")
    p.add_argument("--output", help="output path (default: stdout)")
    p.add_argument("--tau", type=float, help="known upper end of the support")
    p.add_argument("--tail", choices=("auto", "on", "off"), default="auto",
                   help="exponential tail beyond tau (auto: on unless tau is known or data allow no tail)")
    p.add_argument("--gamma-init", help="starting coefficients v1,v2,...")
    p.add_argument("--p-tol", type=float)
    p.add_argument("--gamma-tol", type=float)
    p.add_argument("--max-outer", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mable-ph", description="Bernstein-polynomial Cox PH fits for interval-censored data")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit (gamma, p) at a degree or a selected degree")
    _fit_flags(p)
    p.add_argument("--degree", type=int)
    p.add_argument("--grid", help="select the degree on m0:mk first")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select-degree", help="log-likelihood over a degree grid and the change-point choice")
    _fit_flags(p)
    p.add_argument("--grid", help="m0:mk (default 2:20)")
    p.add_argument("--mode", choices=("full", "profile"), default="full")
    p.set_defaults(func=cmd_select_degree)

    p = sub.add_parser("curve", help="evaluate S(t|x) and f(t|x) from a fit report")
    p.add_argument("--report", help="fit report written by 'fit'")
    p.add_argument("--output")
    p.add_argument("--covariates", help="rows separated by ';', values by ',' (default: the baseline)")
    p.add_argument("--times", help="start:stop:num or a comma list (default: 101 points on [0, tau])")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("simulate", help="Monte-Carlo MSEs for the Weibull PH design")
    p.add_argument("--output")
    p.add_argument("--curve-output", help="also write pointwise survival MSEs here")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--replicates", type=int, default=300)
    p.add_argument("--seed", type=int, default=SimDesign.seed)
    p.add_argument("--inspections", type=int, default=SimDesign.inspections)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--grid", help="degree grid m0:mk (default 2:min(20, n/3))")
    p.add_argument("--p-tol", type=float)
    p.add_argument("--gamma-tol", type=float)
    p.add_argument("--max-outer", type=int)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:  # DataError and DegenerateError are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
