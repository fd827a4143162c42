"""
Command line entry point.

Exit status is 0 on success, 1 when the run failed with a diagnostic and 2
when the run finished but a bound or invariant check failed.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .config import parse_coarsening_config, parse_config, setup_logging
from .exceptions import LattedsError
from .experiments import coarsen, diagnose, recurrence, simulate
from .models import RecurrenceParams
from .storage import RECURRENCE_HEADER, csv_text, write_recurrence
from .verify import SUITES, verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


def _radii(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"radii must be comma separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latteds", description="Energy balance experiments on lattice dissipative systems"
    )
    parser.add_argument("--log-level", default=None, help="overrides LATTEDS_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a configured system and write its ledger")
    p.add_argument("--config", required=True, type=Path)

    p = sub.add_parser("diagnose", help="recompute the ledger of a stored run")
    p.add_argument("--trajectory", required=True, type=Path)
    p.add_argument("--radii", type=_radii, default=None)

    p = sub.add_parser("recurrence", help="stable manifold of the flux recurrence")
    p.add_argument("--N", dest="dim", type=int, required=True)
    p.add_argument("--lambda", dest="lambda_rec", type=float, required=True)
    p.add_argument("--eps", dest="eps_rec", type=float, required=True)
    p.add_argument("--r-max", dest="r_max", type=int, default=32)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--method", choices=("bisection", "pullback"), default="bisection")
    p.add_argument("--output", type=Path, default=None, help="CSV file; stdout by default")

    p = sub.add_parser("coarsen", help="run the bistable coarsening experiment")
    p.add_argument("--config", required=True, type=Path)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("--suite", choices=("all", *SUITES), default="all")
    return parser


def _simulate(args) -> int:
    result = simulate(parse_config(args.config))
    print(f"wrote {result.directory}: {len(result.reports)} bound checks, {len(result.failed)} failed")
    return EXIT_CHECK_FAILED if result.failed else EXIT_OK


def _diagnose(args) -> int:
    result = diagnose(args.trajectory, args.radii)
    print(f"wrote {result.directory}: {len(result.reports)} bound checks, {len(result.failed)} failed")
    return EXIT_CHECK_FAILED if result.failed else EXIT_OK


def _recurrence(args) -> int:
    params = RecurrenceParams(dim=args.dim, lambda_rec=args.lambda_rec, eps_rec=args.eps_rec)
    rows = recurrence(params, args.r_max, args.tol, args.method)
    if args.output is None:
        sys.stdout.write(csv_text(RECURRENCE_HEADER, rows))
    else:
        write_recurrence(args.output, rows)
    return EXIT_OK if all(row[-1] for row in rows) else EXIT_CHECK_FAILED


def _coarsen(args) -> int:
    directory, stats = coarsen(parse_coarsening_config(args.config))
    print(
        f"wrote {directory}: {len(stats.snapshots)} snapshots, "
        f"flip fraction {stats.flip_fraction:.3f}, growth {stats.growth_ratio:.2f}x"
    )
    return EXIT_OK


def _verify(args) -> int:
    results = verify(args.suite)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.suite}/{result.name} {result.detail}".rstrip())
    failed = sum(1 for result in results if not result.passed)
    print(f"{len(results) - failed} passed, {failed} failed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


COMMANDS = {
    "simulate": _simulate,
    "diagnose": _diagnose,
    "recurrence": _recurrence,
    "coarsen": _coarsen,
    "verify": _verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse ``argv`` and run the chosen subcommand.

    Args:
        argv (Sequence[str] | None): Arguments without the program name;
            ``sys.argv[1:]`` when omitted.

    Returns:
        int: The exit status.
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except LattedsError as error:
        print(f"latteds {args.command}: {type(error).__name__}: {error.detail}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as error:
        # pydantic rejects out-of-range recurrence flags
        print(f"latteds {args.command}: {error}".splitlines()[0], file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
