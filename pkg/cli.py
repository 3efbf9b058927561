"""Command line interface: ``lidmed {solve,verify,map,invmap,pgm,gen,bench}``.

Exit codes: 0 on success, 1 on invalid input, 2 on a computation failure or
a failed certificate. Errors are printed as ``{"error": {"kind", "detail"}}``.
"""
import argparse
import io
import logging
import sys
from typing import Callable, Dict, List, Optional

import numpy as np

try:
    from .baselines import bench_scaling
    from .certificates import check_optimal
    from .complex_linalg import RankProfile
    from .config import CLI_MAX_ITER, CLI_TOL, LOG_FORMAT, LOG_LEVEL, SOLVER_TOL
    from .documents import (
        dumps,
        ensemble_from_document,
        ensemble_to_document,
        error_document,
        loads,
        povm_from_document,
        povm_to_document,
        profile_list,
        solution_to_document,
    )
    from .ensemble import random_ensemble
    from .exceptions import InputError, ShapeMismatch
    from .med_solver import SOLVER_NAMES, SolverConfig, solve_ensemble
    from .rotation_map import map_R, map_R_inverse, pgm
except ImportError:
    from baselines import bench_scaling
    from certificates import check_optimal
    from complex_linalg import RankProfile
    from config import CLI_MAX_ITER, CLI_TOL, LOG_FORMAT, LOG_LEVEL, SOLVER_TOL
    from documents import (
        dumps,
        ensemble_from_document,
        ensemble_to_document,
        error_document,
        loads,
        povm_from_document,
        povm_to_document,
        profile_list,
        solution_to_document,
    )
    from ensemble import random_ensemble
    from exceptions import InputError, ShapeMismatch
    from med_solver import SOLVER_NAMES, SolverConfig, solve_ensemble
    from rotation_map import map_R, map_R_inverse, pgm

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAILURE = 2


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise InputError(f"Cannot read '{path}': {e}") from e


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    # Solve well below the certificate tolerance so the residuals have headroom.
    try:
        return SolverConfig(tol=min(args.tol, SOLVER_TOL), max_iters=args.max_iter)
    except ValueError as e:
        raise InputError(f"Invalid solver flags: {e}") from e


def _load_ensemble(args: argparse.Namespace, path: str):
    return ensemble_from_document(loads(_read(path)), args.tol)


def cmd_solve(args: argparse.Namespace) -> int:
    e = _load_ensemble(args, args.input)
    result = solve_ensemble(e, args.solver, _solver_config(args))
    cert = check_optimal(e, result.povm, tol=args.tol)
    _emit(dumps(solution_to_document(result, cert)), args.out)
    if not cert.passed:
        logger.warning(f"Solution failed its certificate: {cert.failures()}")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    e = _load_ensemble(args, args.ensemble)
    pov = povm_from_document(loads(_read(args.povm)), profile=e.profile)
    if pov.profile.m != e.m or pov.n != e.n:
        raise ShapeMismatch(
            f"Measurement has {pov.profile.m} elements of size {pov.n}, ensemble has {e.m} states of size {e.n}"
        )
    cert = check_optimal(e, pov, tol=args.tol)
    _emit(dumps(cert.to_dict()), args.out)
    return EXIT_OK if cert.passed else EXIT_FAILURE


def cmd_map(args: argparse.Namespace) -> int:
    e = _load_ensemble(args, args.input)
    if args.solver == "barrier":
        raise InputError("The map needs the block-diagonal solution; use --solver newton or homotopy")
    result = solve_ensemble(e, args.solver, _solver_config(args))
    image = map_R(e, result.solution, result.decomposition).ensemble
    _emit(dumps(ensemble_to_document(image)), args.out)
    return EXIT_OK


def cmd_invmap(args: argparse.Namespace) -> int:
    q = _load_ensemble(args, args.input)
    _emit(dumps(ensemble_to_document(map_R_inverse(q))), args.out)
    return EXIT_OK


def cmd_pgm(args: argparse.Namespace) -> int:
    e = _load_ensemble(args, args.input)
    _emit(dumps(povm_to_document(pgm(e))), args.out)
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    profile = RankProfile.parse(args.profile)
    e = random_ensemble(profile, args.seed)
    _emit(dumps(ensemble_to_document(e, seed=args.seed)), args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError as e:
        raise InputError(f"Invalid --sizes '{args.sizes}': {e}") from e
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    unknown = [s for s in solvers if s not in SOLVER_NAMES]
    if unknown:
        raise InputError(f"Unknown solvers {unknown}, expected a subset of {list(SOLVER_NAMES)}")
    profiles = profile_list(args.profile) if args.profile else None
    report = bench_scaling(
        profiles, sizes, args.repeats, args.seed, solvers, args.workers, _solver_config(args)
    )
    buffer = io.StringIO()
    report.to_csv(buffer)
    _emit(buffer.getvalue(), args.out)
    for solver, slope in report.slopes.items():
        logger.info(f"{solver}: fitted slope {slope:.3f}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "map": cmd_map,
    "invmap": cmd_invmap,
    "pgm": cmd_pgm,
    "gen": cmd_gen,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=CLI_TOL, help="certificate and validation tolerance")
    common.add_argument("--max-iter", type=int, default=CLI_MAX_ITER, help="Newton iteration cap")
    common.add_argument("--solver", choices=SOLVER_NAMES, default="newton")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(
        prog="lidmed", description="Optimal measurements for linearly independent ensembles"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="optimal measurement of an ensemble")
    p.add_argument("input", nargs="?", default="-", help="ensemble JSON ('-' for stdin)")

    p = sub.add_parser("verify", parents=[common], help="certificate for a measurement")
    p.add_argument("ensemble")
    p.add_argument("povm")

    for name, text in (("map", "image ensemble"), ("invmap", "preimage ensemble"), ("pgm", "pretty good measurement")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("input", nargs="?", default="-")

    p = sub.add_parser("gen", parents=[common], help="random ensemble")
    p.add_argument("--profile", required=True, help="ranks such as 2,1")

    p = sub.add_parser("bench", parents=[common], help="solver scaling benchmark (CSV)")
    p.add_argument("--sizes", default="4,6,8")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--solvers", default=",".join(SOLVER_NAMES))
    p.add_argument("--profile", action="append", help="profile to include, repeatable")
    p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, LOG_LEVEL.upper(), logging.WARNING),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except InputError as e:
        logger.error(f"Invalid input: {e}")
        _emit(dumps(error_document(e)), args.out)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        logger.error(f"Computation failed: {e}")
        _emit(dumps(error_document(e)), args.out)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
