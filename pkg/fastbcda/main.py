"""
Command-line entrypoint.

Subcommands:
    generate  write a synthetic P1/P2 instance file
    solve     run one registered solver on an instance file
    bench     run the target-value protocol over an experiment grid
    profile   turn a results CSV into performance-profile curves

Exit codes: 0 success, 1 usage error, 2 numerical or assumption failure,
3 I/O error. Log lines go to stderr; command results go to stdout.
"""

import argparse
import json
import sys
from typing import Any, Callable, Dict, Optional, Sequence

from pydantic import ValidationError

from fastbcda.bench.experiment import (
    load_experiment_spec,
    read_results_csv,
    run_experiment,
)
from fastbcda.bench.profiles import performance_profile, write_profile_csv
from fastbcda.core.config import get_settings
from fastbcda.core.errors import FastBCDAError, InstanceFormatError
from fastbcda.core.logging_config import get_logger, setup_logging
from fastbcda.schemas.bench import ExperimentSpec
from fastbcda.schemas.common import ProblemKind
from fastbcda.schemas.solver import Measure
from fastbcda.solvers import get_solver, list_solvers
from fastbcda.solvers.problem import (
    generate_instance,
    load_instance,
    save_instance,
)
from fastbcda.solvers.trace import write_trace_csv

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

PRESETS: Dict[str, Callable[[], ExperimentSpec]] = {
    "desk": ExperimentSpec.desk,
    "full": ExperimentSpec.full,
}


class UsageError(Exception):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting with status 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, default=str))


def cmd_generate(args: argparse.Namespace) -> int:
    """Generate an instance and write it to --out."""
    m = args.m if args.m is not None else args.n // 4
    inst = generate_instance(
        args.kind,
        args.n,
        m,
        args.rho,
        density=args.density,
        noise_var=args.noise_var,
        seed=args.seed,
    )
    path = save_instance(inst, args.out)
    _emit({"instance": str(path), "n": inst.n, "m": inst.m, "tau": inst.tau})
    return EXIT_OK


def _solve_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    settings = get_settings()
    overrides: Dict[str, Any] = {
        "tol": args.tol if args.tol is not None else settings.default_tol
    }
    family = get_solver(args.solver).family
    if family == "bcda":
        if args.eps is not None:
            overrides["epsilon"] = args.eps
        if args.adaptive_eps:
            overrides["adaptive_eps"] = True
        if args.enhanced:
            overrides["enhanced"] = True
        if args.measure is not None:
            overrides["measure"] = args.measure
    else:
        overrides["power_iter_tol"] = settings.power_iter_tol
        overrides["power_iter_max"] = settings.power_iter_max
    return overrides


def cmd_solve(args: argparse.Namespace) -> int:
    """Solve an instance file and print a JSON summary."""
    if args.solver is None:
        args.solver = f"fast{args.r}"
    inst = load_instance(args.instance)
    max_iter = (
        args.max_outer
        if args.max_outer is not None
        else get_settings().default_max_outer
    )
    solver = get_solver(args.solver)
    try:
        solution, trace = solver.run(
            inst, max_iter=max_iter, **_solve_overrides(args)
        )
    except FastBCDAError as e:
        partial = getattr(e, "trace", None)
        if args.trace_out and partial is not None:
            write_trace_csv(partial, args.trace_out)
        raise

    if args.trace_out:
        write_trace_csv(trace, args.trace_out)
    _emit(
        {
            "solver": args.solver,
            "status": solution.status.value,
            "f": solution.f,
            "iterations": solution.iterations,
            "kkt_violation": solution.kkt_violation,
            "elapsed_s": solution.elapsed_s,
            "degraded": solution.degraded,
            "nonzeros": int((solution.x != 0).sum()),
        }
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    """Run an experiment grid and write results.csv under --out-dir."""
    if args.spec is not None:
        spec = load_experiment_spec(args.spec)
    else:
        spec = PRESETS[args.preset]()
    if args.write_traces:
        spec = spec.model_copy(update={"write_traces": True})
    path = run_experiment(spec, args.out_dir, workers=args.workers)
    rows = read_results_csv(path)
    errors = path.parent / "errors.csv"
    _emit(
        {
            "results": str(path),
            "rows": len(rows),
            "failures": sum(not row.reached for row in rows),
            "errors": (
                str(errors) if spec.write_traces and errors.exists() else None
            ),
        }
    )
    return EXIT_OK


def cmd_profile(args: argparse.Namespace) -> int:
    """Compute performance profiles from a results CSV."""
    rows = read_results_csv(args.results)
    curves = performance_profile(rows, failure_penalty=args.failure_penalty)
    path = write_profile_csv(curves, args.out)
    _emit(
        {
            "profile": str(path),
            "solvers": [curve.solver for curve in curves],
            "solved_fraction": {
                curve.solver: curve.fractions[-1] for curve in curves
            },
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with all subcommands."""
    parser = _Parser(
        prog="fastbcda",
        description="Active-set block coordinate descent for the lasso",
    )
    parser.add_argument(
        "--log-level", default=None, help="Override FASTBCDA_LOG_LEVEL"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Generate a synthetic instance")
    gen.add_argument(
        "--kind",
        required=True,
        choices=[ProblemKind.P1.value, ProblemKind.P2.value],
    )
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, default=None, help="Default n/4")
    gen.add_argument("--rho", type=float, required=True)
    gen.add_argument("--density", type=float, default=0.5)
    gen.add_argument("--noise-var", type=float, default=1e-3)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(handler=cmd_generate)

    slv = sub.add_parser("solve", help="Solve an instance file")
    slv.add_argument("--instance", required=True)
    slv.add_argument(
        "--solver",
        default=None,
        choices=list_solvers(),
        help="Registered solver; default fast<r>",
    )
    slv.add_argument("--r", type=int, choices=[1, 2], default=1)
    slv.add_argument("--eps", type=float, default=None)
    slv.add_argument("--adaptive-eps", action="store_true")
    slv.add_argument("--enhanced", action="store_true")
    slv.add_argument(
        "--measure", choices=[m.value for m in Measure], default=None
    )
    slv.add_argument("--tol", type=float, default=None)
    slv.add_argument("--max-outer", type=int, default=None)
    slv.add_argument("--trace-out", default=None)
    slv.set_defaults(handler=cmd_solve)

    bench = sub.add_parser("bench", help="Run the target-value protocol")
    source = bench.add_mutually_exclusive_group()
    source.add_argument("--spec", default=None, help="ExperimentSpec JSON")
    source.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    bench.add_argument("--out-dir", required=True)
    bench.add_argument("--workers", type=int, default=None)
    bench.add_argument(
        "--write-traces",
        action="store_true",
        help="Keep per-run traces and write averaged errors.csv",
    )
    bench.set_defaults(handler=cmd_bench)

    prof = sub.add_parser("profile", help="Build performance profiles")
    prof.add_argument("--results", required=True)
    prof.add_argument("--out", required=True)
    prof.add_argument("--failure-penalty", type=float, default=None)
    prof.set_defaults(handler=cmd_profile)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"fastbcda: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    settings = get_settings()
    setup_logging(
        level=args.log_level or settings.log_level,
        json_format=settings.log_format == "json",
        log_file=settings.log_file,
    )

    try:
        return args.handler(args)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    except (OSError, InstanceFormatError) as e:
        logger.error(
            f"I/O failure: {e}", extra={"code": getattr(e, "code", None)}
        )
        return EXIT_IO
    except FastBCDAError as e:
        logger.error(f"{type(e).__name__}: {e}", extra={"code": e.code})
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
