"""Command line front end: ``mqkansa solve|sweep|search|verify``.

Exit status: 0 success, 1 invalid input, 2 numerical failure, 3 failed
verification.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
import warnings
from fractions import Fraction

import gmpy2
import numpy as np

from . import __version__
from .collocation import error_report, solve
from .config import MANIFEST_SCHEMA, ConfigError, RunConfig, load_config
from .kernels import MultiquadricKernel
from .linalg import PrecisionWarning, SingularMatrixError
from .report import (SchemaError, TraceWriter, build_report, load_report, verify, write_plot_data,
                     write_report)
from .search import BudgetExhausted, NonDescent, SweepRecord, directed_search, sweep
from ._validation import parse_shape
from .precision import format_decimal

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3


class NumericalFailure(RuntimeError):
    """A run finished without a usable result."""


def _manifest(cfg: RunConfig, problem, outputs: list[str]) -> dict:
    ctx = cfg.context()
    return {
        "schema": MANIFEST_SCHEMA,
        "config": cfg.to_dict(),
        "precision": {"digits": ctx.digits, "bits": ctx.bits, "serial_digits": ctx.serial_digits,
                      "rounding": "nearest"},
        "problem": problem.describe(),
        "outputs": outputs,
        "versions": {"mqkansa": __version__, "python": platform.python_version(),
                     "gmpy2": gmpy2.version(), "mpfr": gmpy2.mpfr_version(), "numpy": np.__version__},
    }


def run(cfg: RunConfig, *, log=None, criterion=None) -> dict:
    """Execute a validated config and write its output files into ``cfg.out``.

    ``criterion`` replaces the collocation solve in sweep and search modes
    (a callable ``c -> SweepRecord``, e.g. a tabulated criterion).
    Returns the report dict.  Raises :class:`NumericalFailure` when no c
    could be solved (solve mode: when the single solve failed).
    """
    cfg.validate()
    ctx = cfg.context()
    problem = cfg.build_problem()
    beta = Fraction(cfg.beta)
    os.makedirs(cfg.out, exist_ok=True)
    out = lambda name: os.path.join(cfg.out, name)  # noqa: E731
    outputs = ["report.json", "report.csv", "manifest.json", "trace.jsonl"]
    summary: dict = {"mode": cfg.mode, "problem": problem.name}
    log = log or (lambda msg: None)

    with TraceWriter(out("trace.jsonl")) as trace:
        def on_record(rec):
            trace(rec)
            status = rec.error or f"RMS={_short(rec.rms)} RMSbdy={_short(rec.rms_boundary)}"
            log(f"c={_short(rec.c)} {status} ({rec.solve_seconds:.1f}s)")

        if cfg.mode == "solve":
            c = parse_shape(cfg.c, ctx)
            t0 = time.perf_counter()
            try:
                kernel = MultiquadricKernel(beta, c, problem.dim, ctx)
                sol = solve(problem, kernel)
                rep = error_report(sol, problem)
                rec = SweepRecord(c, rep.rms, rep.rms_boundary, sol.cond, sol.residual,
                                  time.perf_counter() - t0)
                sol.save(out("solution.json"))
                outputs.append("solution.json")
            except (SingularMatrixError, ArithmeticError, ValueError) as exc:
                rec = SweepRecord(c, error=f"{type(exc).__name__}: {exc}",
                                  solve_seconds=time.perf_counter() - t0)
            on_record(rec)
            records = [rec]
        elif cfg.mode == "sweep":
            records = sweep(problem, beta, cfg.c_list, ctx, workers=cfg.workers,
                            criterion=criterion, on_record=on_record)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BudgetExhausted)
                warnings.simplefilter("ignore", NonDescent)
                res = directed_search(problem, beta, cfg.search_config(ctx), ctx,
                                      workers=cfg.workers, criterion=criterion,
                                      on_record=on_record)
            records = sorted(res.trace, key=lambda r: r.c.value)
            summary.update({"best_c": res.best_c.to_decimal(), "status": res.status,
                            "evaluations": len(res.trace)})

    if cfg.mode in ("sweep", "search"):
        write_plot_data(records, out("plot.csv"))
        outputs.append("plot.csv")
    summary["failures"] = sum(1 for r in records if not r.ok)
    report = build_report(records, summary)
    write_report(report, out("report.json"))
    with open(out("manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(_manifest(cfg, problem, outputs), fh, indent=1)
        fh.write("\n")
    if all(not r.ok for r in records):
        raise NumericalFailure(records[0].error)
    return report


def _short(x) -> str:
    return "-" if x is None else format_decimal(x.value, 4)


# ---------------------------------------------------------------------------
# argument parsing

def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_run_flags(p: argparse.ArgumentParser, mode: str) -> None:
    p.add_argument("--config", help="YAML/JSON run configuration or a run manifest")
    p.add_argument("--problem", help="paper-1d or paper-2d")
    p.add_argument("--beta", help="multiquadric exponent (default -1)")
    p.add_argument("--digits", help="decimal digits of working precision")
    p.add_argument("--grid", help="points per axis of the collocation grid")
    p.add_argument("--tests", help="number of domain test points")
    p.add_argument("--boundary-tests", help="number of boundary test points")
    p.add_argument("--workers", help="concurrent solves (sweep, search probe)")
    p.add_argument("--out", help="output directory")
    if mode == "solve":
        p.add_argument("--c", help="shape parameter, e.g. 120 or '800*sqrt(2)*1e14'")
    if mode in ("sweep", "search"):
        p.add_argument("--c-list", help="comma separated shape parameters"
                       + ("" if mode == "sweep" else " used as the search grid"))
    if mode == "search":
        p.add_argument("--c0", help="starting shape parameter")
        p.add_argument("--step", action="append",
                       help="step of the schedule ('500' additive, 'x1.5' multiplicative); repeatable")
        p.add_argument("--max-evals", help="evaluation budget (>= 3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqkansa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mqkansa {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="no progress lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode, text in (("solve", "solve at one shape parameter"),
                       ("sweep", "solve at a list of shape parameters"),
                       ("search", "directed search on boundary RMS")):
        _add_run_flags(sub.add_parser(mode, help=text), mode)
    v = sub.add_parser("verify", help="compare a report against a reference")
    v.add_argument("report", help="report.json or a run directory")
    v.add_argument("reference", help="reference report, or a shipped name: "
                   "table1, paper-1d, paper-1d-published")
    v.add_argument("--tol-rms", type=float, help="log10 tolerance for RMS (default 2)")
    v.add_argument("--tol-rmsbdy", type=float, help="log10 tolerance for RMSbdy (default 2)")
    v.add_argument("--tol-cond", type=float, help="log10 tolerance for COND (default 3)")
    return parser


_FLAG_FIELDS = {"problem": "problem", "beta": "beta", "digits": "digits", "grid": "grid",
                "tests": "tests", "boundary_tests": "boundary_tests", "workers": "workers",
                "out": "out", "c": "c", "c0": "c0", "max_evals": "max_evals"}


def config_from_args(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
        if cfg.mode != args.command:
            raise ConfigError(f"config is for mode {cfg.mode!r}, command is {args.command!r}", "mode")
        data = cfg.to_dict()
    else:
        data = {"mode": args.command}
    for flag, name in _FLAG_FIELDS.items():
        val = getattr(args, flag, None)
        if val is not None:
            data[name] = val
    if getattr(args, "c_list", None) is not None:
        data["c_list"] = _split_list(args.c_list)
    if getattr(args, "step", None):
        data["steps"] = [s for item in args.step for s in _split_list(item)]
    cfg = RunConfig(**data)
    return cfg.validate()


def shipped_reference(name: str) -> str:
    """Path of a reference report shipped with the package."""
    from importlib import resources
    files = {"table1": "table1.json", "paper-1d": "paper-1d.json",
             "paper-1d-published": "paper-1d-published.json"}
    return str(resources.files("mqkansa").joinpath("data", files[name]))


def _verify_cmd(args) -> int:
    report_path = args.report
    if os.path.isdir(report_path):
        report_path = os.path.join(report_path, "report.json")
    ref_path = args.reference
    if not os.path.exists(ref_path):
        try:
            ref_path = shipped_reference(ref_path)
        except KeyError:
            print(f"error: no such reference {args.reference!r}", file=sys.stderr)
            return EXIT_VALIDATION
    try:
        report = load_report(report_path)
        reference = load_report(ref_path)
        tol = {k: v for k, v in (("RMS", args.tol_rms), ("RMSbdy", args.tol_rmsbdy),
                                 ("COND", args.tol_cond)) if v is not None}
        cells = verify(report, reference, tol)
    except (OSError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for cell in cells:
        print(cell.line())
    failed = sum(not c.ok for c in cells)
    print(f"{len(cells) - failed}/{len(cells)} cells within tolerance")
    return EXIT_OK if failed == 0 and cells else EXIT_VERIFY


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify":
        return _verify_cmd(args)
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", PrecisionWarning)
            report = run(cfg, log=log)
    except NumericalFailure as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    summary = report["summary"]
    if "best_c" in summary:
        print(f"best c = {summary['best_c'][:24]}... ({summary['status']}, "
              f"{summary['evaluations']} evaluations)")
    print(f"wrote {os.path.join(cfg.out, 'report.json')}")
    return EXIT_NUMERICAL if summary["failures"] else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
