"""
Batch front end: every subcommand maps one library operation over a grid and
streams the rows to stdout as JSON Lines or CSV.

    python cli.py count --string power:d=0.5 --p 2 --lambda 986.9604401089358
    python cli.py horn --string power:d=2 --lambda 1e3 1e4 --out csv
    python cli.py pip --p 3
    python cli.py --job job.json
"""
import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

import pandas as pd
from dotenv import load_dotenv
from tqdm import tqdm

from cross_validation import run_checks
from dimension_kernel import DimensionFunction
from errors import DomainError, SpectraError
from horn2d import HornDomain, horn_asymptotic_bounds, horn_bracket
from minkowski import DEFAULT_D_GRID, dimension_scan, minkowski_content
from string_spectrum import (
    Algorithm,
    FractalString,
    TailLaw,
    TailMode,
    asymptotic_count,
    count,
    oscillating_count,
    pi_p,
)
from summation import zeta_extended

load_dotenv()
logger = logging.getLogger(__name__)

# ==========================================
# CONFIGURATION
# ==========================================
DEFAULT_THREADS = os.getenv("SPECTRA_THREADS", "auto")
DEFAULT_TOL = float(os.getenv("SPECTRA_TOL", "1e-10"))
DEFAULT_LOG_LEVEL = os.getenv("SPECTRA_LOG_LEVEL", "WARNING")
COMMANDS = ("count", "asym", "content", "dimension", "horn", "oscillate", "zeta", "pip", "validate")


# --- argument types ---

def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a number") from None
    if not (value > 0) or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"'{text}' must be a positive finite number")
    return value


def dimension_spec(text: str) -> DimensionFunction:
    try:
        return DimensionFunction.parse(text)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def length_list(text: str) -> tuple:
    return tuple(positive_float(v) for v in text.split(",") if v.strip())


def probe_spec(text: str):
    try:
        return float(text)
    except ValueError:
        return dimension_spec(text)


def thread_count(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threads must be an integer or 'auto', got '{text}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be at least 1")
    return value


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", choices=("json", "csv"), default="json")
    common.add_argument("--threads", type=thread_count, default=thread_count(DEFAULT_THREADS))
    common.add_argument("--tol", type=positive_float, default=DEFAULT_TOL)
    common.add_argument("--log-level", default=DEFAULT_LOG_LEVEL)

    string = argparse.ArgumentParser(add_help=False)
    string.add_argument("--string", type=dimension_spec, help="tail law, e.g. powerlog:d=0.5,a=1")
    string.add_argument("--L", type=positive_float, default=1.0)
    string.add_argument("--j0", type=int, default=1)
    string.add_argument("--prefix", type=length_list, default=(), help="explicit lengths l1,l2,...")
    string.add_argument("--mode", choices=[m.value for m in TailMode], default=TailMode.EXACT.value)
    string.add_argument("--c1", type=positive_float, default=1.0)
    string.add_argument("--c2", type=positive_float, default=1.0)

    lam = argparse.ArgumentParser(add_help=False)
    lam.add_argument("--lambda", dest="lam", type=positive_float, nargs="+", required=True)

    eps = argparse.ArgumentParser(add_help=False)
    eps.add_argument("--eps", type=positive_float, nargs="+")
    eps.add_argument("--eps-pow2", type=int, nargs=2, metavar=("KMIN", "KMAX"))

    parser = argparse.ArgumentParser(prog="cli.py", description="Spectral counting on fractal strings and horns.")
    parser.add_argument("--job", help="JSON job file; replaces the command line")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("count", parents=[common, string, lam], help="exact count with asymptotic terms")
    p.add_argument("--p", type=positive_float, required=True)
    p.add_argument("--algo", choices=("naive", "hyperbola"), default="hyperbola")

    p = sub.add_parser("asym", parents=[common, string, lam], help="asymptotic terms only")
    p.add_argument("--p", type=positive_float, required=True)

    p = sub.add_parser("content", parents=[common, string, eps], help="scaled tubular measures")
    p.add_argument("--probe", type=probe_spec, required=True, help="exponent d or a family spec")

    p = sub.add_parser("dimension", parents=[common, string, eps], help="Minkowski dimension scan")
    p.add_argument("--d-grid", type=float, nargs="+", default=list(DEFAULT_D_GRID))

    sub.add_parser("horn", parents=[common, string, lam], help="horn eigenvalue brackets")

    p = sub.add_parser("oscillate", parents=[common, lam], help="self-similar m^k / n^(1-k) string")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=positive_float, required=True)

    p = sub.add_parser("zeta", parents=[common], help="zeta(d) for real d > 0, d != 1")
    p.add_argument("d", type=positive_float)

    p = sub.add_parser("pip", parents=[common], help="the constant pi_p")
    p.add_argument("--p", type=positive_float, required=True)

    sub.add_parser("validate", parents=[common], help="cross-validation report")
    return parser


def job_to_argv(path: str) -> List[str]:
    """Turns a JSON job document into the equivalent command line."""
    with open(path, "r", encoding="utf-8") as f:
        job = json.load(f)
    if job.get("command") not in COMMANDS:
        raise ValueError(f"job command must be one of {COMMANDS}")

    argv = [job["command"]]
    if "d" in job:
        argv.append(repr(job["d"]))
    flags = {
        "string": "--string", "L": "--L", "j0": "--j0", "mode": "--mode", "c1": "--c1", "c2": "--c2",
        "p": "--p", "algo": "--algo", "probe": "--probe", "m": "--m", "n": "--n",
        "output": "--out", "threads": "--threads", "tol": "--tol", "log_level": "--log-level",
    }
    for key, flag in flags.items():
        if key in job:
            argv += [flag, str(job[key])]
    if "prefix" in job:
        argv += ["--prefix", ",".join(repr(float(v)) for v in job["prefix"])]
    for key, flag in (("lambda_grid", "--lambda"), ("eps_grid", "--eps"), ("d_grid", "--d-grid")):
        if key in job:
            argv += [flag] + [repr(float(v)) for v in job[key]]
    if "eps_pow2" in job:
        argv += ["--eps-pow2"] + [str(int(v)) for v in job["eps_pow2"]]
    return argv


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.job:
        try:
            args = parser.parse_args(job_to_argv(args.job))
        except (OSError, ValueError, KeyError) as exc:
            parser.error(f"cannot read job file: {exc}")
    if args.command is None:
        parser.error("a subcommand is required")

    if getattr(args, "lam", None) and any(b <= a for a, b in zip(args.lam, args.lam[1:])):
        parser.error("--lambda values must be strictly increasing")
    if args.command in ("content", "dimension"):
        if args.eps_pow2:
            kmin, kmax = args.eps_pow2
            if kmin >= kmax:
                parser.error("--eps-pow2 needs KMIN < KMAX")
            args.eps = [2.0 ** -k for k in range(kmin, kmax + 1)]
        if not args.eps:
            parser.error("give --eps or --eps-pow2")
        if any(b >= a for a, b in zip(args.eps, args.eps[1:])):
            parser.error("--eps values must be strictly decreasing")
    if args.command in ("count", "asym", "content", "dimension", "horn"):
        if args.string is None and not (args.prefix and args.command != "horn"):
            parser.error("give --string (or --prefix for a finite string)")
        if args.j0 < 1:
            parser.error("--j0 must be at least 1")
    return args


# --- commands ---

def make_string(args) -> FractalString:
    tail = None
    if args.string is not None:
        tail = TailLaw(args.string, TailMode(args.mode), args.L, args.j0, args.c1, args.c2)
    return FractalString(prefix=args.prefix, tail=tail)


def fan_out(func: Callable, grid: Sequence, threads: int) -> list:
    """func over grid on a worker pool; results come back in grid order."""
    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = pool.map(func, grid)
        return list(tqdm(rows, total=len(grid), disable=not sys.stderr.isatty(), file=sys.stderr, leave=False))


def rows_for(args) -> list:
    cmd = args.command
    if cmd in ("count", "asym"):
        s = make_string(args)
        spec = s.describe()
        if cmd == "count":
            algo = Algorithm(args.algo)
            job = lambda lam: {"spec": spec, **count(s, args.p, lam, algo, args.tol).to_record()}
        else:
            job = lambda lam: {"spec": spec, **asymptotic_count(s, args.p, lam, args.tol).to_record()}
        return fan_out(job, args.lam, args.threads)

    if cmd == "content":
        s = make_string(args)
        est = minkowski_content(s, args.probe, args.eps, args.tol)
        return [{"spec": s.describe(), "probe": est.probe, "eps": e, "tubular_measure": t, "scaled_value": v,
                 "upper": est.upper, "lower": est.lower, "measurable": est.measurable_flag}
                for e, t, v in zip(est.eps_grid, est.tubular, est.values)]

    if cmd == "dimension":
        s = make_string(args)
        return [{"spec": s.describe(), "eps_min": args.eps[-1], "eps_max": args.eps[0],
                 "dimension": dimension_scan(s, args.d_grid, args.eps, args.tol)}]

    if cmd == "horn":
        horn = HornDomain(args.string, args.L)

        def job(lam):
            bracket = horn_bracket(horn, lam)
            lower_pred, upper_pred = horn_asymptotic_bounds(horn, lam)
            return {"spec": horn.describe(), "lambda": lam, "lower": bracket.lower, "upper": bracket.upper,
                    "lower_pred": lower_pred, "upper_pred": upper_pred,
                    "j_max_lower": bracket.j_max_lower, "j_max_upper": bracket.j_max_upper}
        return fan_out(job, args.lam, args.threads)

    if cmd == "oscillate":
        def job(lam):
            result = oscillating_count(args.m, args.n, args.p, lam)
            return {"m": args.m, "n": args.n, "p": args.p, "lambda": lam,
                    "exact": result.exact, "s_value": result.s_value}
        return fan_out(job, args.lam, args.threads)
    raise ValueError(f"no row builder for '{cmd}'")


def write_rows(rows: list, out: str, stream) -> None:
    if out == "csv":
        pd.DataFrame(rows).to_csv(stream, index=False, float_format="%.17g", lineterminator="\n")
        return
    for row in rows:
        stream.write(json.dumps(row) + "\n")


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(list(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    logger.info(f"--- {args.command} ---")
    try:
        if args.command == "pip":
            print(repr(pi_p(args.p)))
        elif args.command == "zeta":
            print(repr(zeta_extended(args.d, args.tol)))
        elif args.command == "validate":
            report = run_checks()
            write_rows(report.to_dict(orient="records"), args.out, sys.stdout)
            return 1 if (report["Status"] == "FAIL").any() else 0
        else:
            write_rows(rows_for(args), args.out, sys.stdout)
    except SpectraError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.flush()
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
