"""Command-line front end: ``exotest {describe,test,simulate,power}``.

Exit codes: 0 success, 2 usage or parse error, 3 degenerate data.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
from pathlib import Path

from . import __version__
from .bootstrap import BootstrapConfig, run_test
from .dataset import DataError, DegenerateDataError, cell_audit, min_cell_check, read_csv, to_csv
from .montecarlo import DgpParams, results_to_csv, simulate, warp_speed_study
from .rng import resolve_seed
from .survival import conditional_km
from .teststats import run_pipeline

EXIT_USAGE = 2
EXIT_DEGENERATE = 3

log = logging.getLogger("exotest")


def _number_list(kind):
    def parse(text: str):
        try:
            values = [kind(tok) for tok in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} list: {text!r}") from None
        if not values:
            raise argparse.ArgumentTypeError("empty list")
        return values
    return parse


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _add_common(p: argparse.ArgumentParser, *, data: bool = True) -> None:
    p.add_argument("--output", "-o", help="output file (directory for describe); stdout if omitted")
    p.add_argument("--seed", type=_seed, default=None,
                   help="random seed (default: $EXOTEST_SEED, else 42)")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker processes")
    if data:
        p.add_argument("--gamma", type=float, default=0.0, help="trim ranks above 1 - gamma")
        p.add_argument("--weights", choices=("constant", "empirical"), default="constant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exotest",
        description="Test exogeneity of a categorical treatment in censored duration data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="cell audit, conditional KM curves, ranks and D surface")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--threshold", type=_positive_int, default=5,
                   help="warn about cells with fewer observations")
    _add_common(p)

    p = sub.add_parser("test", help="bootstrap exogeneity test")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--statistic", choices=("ks", "cm"), default="cm")
    p.add_argument("--boot", choices=("a", "b"), default="a")
    p.add_argument("--reps", type=_positive_int, default=1000, help="bootstrap replicates B")
    p.add_argument("--no-t-star", action="store_true", help="omit replicate statistics")
    _add_common(p)

    p = sub.add_parser("simulate", help="draw one dataset from the simulation design")
    p.add_argument("--n", type=_positive_int, default=500)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--eta", type=float, default=2.4)
    p.add_argument("--lambda", dest="lam", type=float, default=-5.7)
    p.add_argument("--latent", action="store_true", help="append the latent u_t column")
    _add_common(p, data=False)

    p = sub.add_parser("power", help="warp-speed size/power study over a parameter grid")
    p.add_argument("--n", type=_number_list(int), default=[500])
    p.add_argument("--alpha", type=_number_list(float), default=[0.0])
    p.add_argument("--eta", type=_number_list(float), default=[2.4])
    p.add_argument("--lambda", dest="lam", type=_number_list(float), default=[-5.7],
                   help="comma list; write negative lists as --lambda=-5.7,-3.8")
    p.add_argument("--statistic", choices=("ks", "cm", "all"), default="cm")
    p.add_argument("--boot", choices=("a", "b", "all"), default="a")
    p.add_argument("--mc", type=_positive_int, default=1000, help="Monte Carlo replications M")
    p.add_argument("--nominal", type=float, default=0.05)
    _add_common(p)
    return parser


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def cmd_describe(args) -> int:
    data = read_csv(args.input)
    out = Path(args.output) if args.output else None
    table = cell_audit(data)
    lines = ["x,w,z,count,censoring_rate"]
    lines += [f"{x},{w},{z},{s.count},{s.censoring_rate!r}" for (x, w, z), s in table.items()]
    cells_csv = "\n".join(lines) + "\n"
    for scheme, cell, count in min_cell_check(data, args.threshold):
        print(f"warning: ({','.join(scheme)}) cell {cell} has only {count} observations",
              file=sys.stderr)
    if out is None:
        sys.stdout.write(cells_csv)
        return 0
    out.mkdir(parents=True, exist_ok=True)
    (out / "cells.csv").write_text(cells_csv, encoding="utf-8")
    (out / "curves.csv").write_text(conditional_km(data, "xz").to_csv(), encoding="utf-8")
    try:
        pipe = run_pipeline(data, args.gamma, args.weights)
    except DegenerateDataError as exc:
        print(f"warning: ranks not written: {exc}", file=sys.stderr)
        return 0
    (out / "ranks.csv").write_text(pipe.ranks.to_csv(), encoding="utf-8")
    (out / "dsurface.csv").write_text(pipe.surface.to_csv(), encoding="utf-8")
    return 0


def cmd_test(args) -> int:
    data = read_csv(args.input)
    config = BootstrapConfig(kind=args.boot.upper(), B=args.reps, statistic=args.statistic,
                             seed=resolve_seed(args.seed), gamma=args.gamma, weights=args.weights)
    report = run_test(data, config, threads=args.threads)
    _emit(report.to_json(include_t_star=not args.no_t_star), args.output)
    return 0


def cmd_simulate(args) -> int:
    params = DgpParams(alpha=args.alpha, eta=args.eta, lam=args.lam, n=args.n)
    latent = simulate(params, resolve_seed(args.seed))
    extra = {"u_t": latent.u_t} if args.latent else None
    _emit(to_csv(latent.data, extra), args.output)
    return 0


def cmd_power(args) -> int:
    if not 0.0 < args.nominal < 1.0:
        raise DataError("--nominal must lie in (0, 1)")
    grid = [DgpParams(alpha=a, eta=e, lam=lam, n=n)
            for n, a, e, lam in itertools.product(args.n, args.alpha, args.eta, args.lam)]
    stats = ("ks", "cm") if args.statistic == "all" else (args.statistic,)
    kinds = ("A", "B") if args.boot == "all" else (args.boot.upper(),)
    results = warp_speed_study(grid, M=args.mc, statistics=stats, kinds=kinds,
                               nominal=args.nominal, seed=resolve_seed(args.seed),
                               gamma=args.gamma, weights=args.weights, threads=args.threads)
    _emit(results_to_csv(results), args.output)
    return 0


COMMANDS = {"describe": cmd_describe, "test": cmd_test, "simulate": cmd_simulate, "power": cmd_power}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, ValueError) as exc:
        print(f"exotest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateDataError as exc:
        print(f"exotest: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"exotest: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
