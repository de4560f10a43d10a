"""
Target-value benchmark protocol.

For every cell (kind, n, rho, seed) of an ExperimentSpec an instance is
generated, the target-setter solver runs to its own stop and fixes f_target,
and every other solver is timed until it first reaches f_target. Hitting the
iteration cap first counts as a failure. One row per (cell, solver) goes to
``results.csv``; with traces enabled the per-solver averaged relative-error
series go to ``errors.csv``.
"""

import asyncio
import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from fastbcda.bench.profiles import (
    average_error_traces,
    relative_error_trace,
    write_error_csv,
)
from fastbcda.core.config import get_settings
from fastbcda.core.errors import (
    BenchmarkError,
    FastBCDAError,
    InvalidParameterError,
    MissingGroundTruthError,
)
from fastbcda.core.logging_config import get_logger, run_context
from fastbcda.schemas.bench import ExperimentSpec, ResultRow, SolverEntry
from fastbcda.schemas.common import ProblemKind, SolveStatus
from fastbcda.solvers import get_solver
from fastbcda.solvers.problem import Instance, generate_instance
from fastbcda.solvers.trace import (
    RunTrace,
    Solution,
    read_trace_csv,
    write_trace_csv,
)

logger = get_logger(__name__)

RESULT_COLUMNS = (
    "kind",
    "n",
    "m",
    "rho",
    "seed",
    "solver",
    "time_s",
    "iters",
    "final_f",
    "reached",
)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Cell:
    """One generated instance of the grid."""
    kind: ProblemKind
    n: int
    m: int
    rho: float
    seed: int

    @property
    def label(self) -> str:
        return f"{self.kind.value}_n{self.n}_rho{self.rho:g}_s{self.seed}"

    def instance(self, spec: ExperimentSpec) -> Instance:
        return generate_instance(
            self.kind,
            self.n,
            self.m,
            self.rho,
            density=spec.density,
            noise_var=spec.noise_var,
            seed=self.seed,
        )


def experiment_cells(spec: ExperimentSpec) -> List[Cell]:
    """Cells in grid order: kind, then n, then rho, then seed."""
    return [
        Cell(kind, n, n // 4, rho, spec.base_seed + j)
        for kind in spec.kinds
        for n in spec.sizes
        for rho in spec.rhos
        for j in range(spec.seeds_per_cell)
    ]


def load_experiment_spec(path: PathLike) -> ExperimentSpec:
    """
    Read an ExperimentSpec from a JSON file.

    Raises:
        OSError: If the file cannot be read
        pydantic.ValidationError: If the content is not a valid
            experiment grid
    """
    return ExperimentSpec.model_validate_json(Path(path).read_text())


def _target_with_slack(f_target: float, rtol: float) -> float:
    return f_target + rtol * max(1.0, abs(f_target))


def _row(
    cell: Cell,
    solver: str,
    time_s: float,
    iters: int,
    final_f: float,
    reached: bool,
) -> ResultRow:
    return ResultRow(
        kind=cell.kind,
        n=cell.n,
        m=cell.m,
        rho=cell.rho,
        seed=cell.seed,
        solver=solver,
        time_s=time_s,
        iters=iters,
        final_f=final_f,
        reached=reached,
    )


def _failure_row(cell: Cell, solver: str, error: Exception) -> ResultRow:
    trace: Optional[RunTrace] = getattr(error, "trace", None)
    iters = trace.last.iter if trace is not None and trace.records else 0
    return _row(cell, solver, math.nan, iters, math.nan, False)


def solver_overrides(
    spec: ExperimentSpec, entry: SolverEntry
) -> Tuple[int, Dict[str, Any]]:
    """
    Iteration cap and configuration overrides of one solver in the grid.

    A max_iter in the entry overrides replaces the grid-wide cap. BCDA
    entries size s by the true spike count when spec.s_from_truth is set,
    unless the entry chooses otherwise.
    """
    overrides = dict(entry.overrides)
    max_iter = overrides.pop("max_iter", spec.max_iter)
    if spec.s_from_truth and get_solver(entry.name).family == "bcda":
        overrides.setdefault("s_from_truth", True)
    return max_iter, overrides


def _timed_run(
    spec: ExperimentSpec,
    entry: SolverEntry,
    inst: Instance,
    f_target: Optional[float],
    traces_dir: Optional[Path],
    cell: Cell,
) -> Tuple[Solution, float]:
    solver = get_solver(entry.name)
    max_iter, overrides = solver_overrides(spec, entry)
    started = time.perf_counter()
    solution, trace = solver.run(
        inst, f_target=f_target, max_iter=max_iter, **overrides
    )
    elapsed = time.perf_counter() - started
    if traces_dir is not None:
        write_trace_csv(trace, traces_dir / f"{cell.label}_{entry.name}.csv")
    return solution, elapsed


def run_cell(
    spec: ExperimentSpec, cell: Cell, traces_dir: Optional[Path] = None
) -> List[ResultRow]:
    """
    Run the target-value protocol on one cell.

    Solver failures become rows with reached = false and NaN time and
    objective; they never propagate.

    Returns:
        One row per solver, in the order of spec.solvers
    """
    with run_context(instance=cell.label):
        inst = cell.instance(spec)
        setter = next(e for e in spec.solvers if e.name == spec.target_setter)
        rows: Dict[str, ResultRow] = {}

        try:
            solution, elapsed = _timed_run(
                spec, setter, inst, None, traces_dir, cell
            )
        except (FastBCDAError, ArithmeticError, ValueError) as e:
            logger.error(
                f"Target setter {setter.name} failed on {cell.label}: {e}",
                extra={"solver": setter.name, "cell": cell.label},
            )
            return [
                _failure_row(cell, entry.name, e) for entry in spec.solvers
            ]

        # The setter defines the target, so it reaches it by construction
        rows[setter.name] = _row(
            cell,
            setter.name,
            elapsed,
            solution.iterations,
            solution.f,
            True,
        )
        f_target = _target_with_slack(solution.f, spec.target_rtol)

        for entry in spec.solvers:
            if entry.name == setter.name:
                continue
            try:
                result, elapsed = _timed_run(
                    spec, entry, inst, f_target, traces_dir, cell
                )
            except (FastBCDAError, ArithmeticError, ValueError) as e:
                logger.warning(
                    f"{entry.name} failed on {cell.label}: {e}",
                    extra={"solver": entry.name, "cell": cell.label},
                )
                rows[entry.name] = _failure_row(cell, entry.name, e)
                continue
            rows[entry.name] = _row(
                cell,
                entry.name,
                elapsed,
                result.iterations,
                result.f,
                result.status is SolveStatus.target_reached,
            )

    return [rows[entry.name] for entry in spec.solvers]


def _cell_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, ProblemKind):
        return value.value
    return str(value)


def write_results_csv(rows: Sequence[ResultRow], path: PathLike) -> Path:
    """Write result rows with a header; floats use their shortest repr."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(
                [_cell_value(getattr(row, col)) for col in RESULT_COLUMNS]
            )
    return path


def read_results_csv(path: PathLike) -> List[ResultRow]:
    """
    Read a results CSV written by write_results_csv.

    Raises:
        BenchmarkError: If the header does not match the results columns
    """
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise BenchmarkError(
                f"{path} is not a results file: header {reader.fieldnames}",
                code="bad_results_header",
            )
        return [
            ResultRow.model_validate(
                {
                    **row,
                    "time_s": float(row["time_s"]),
                    "final_f": float(row["final_f"]),
                }
            )
            for row in reader
        ]


def write_error_averages(
    spec: ExperimentSpec, traces_dir: PathLike, path: PathLike
) -> Optional[Path]:
    """
    Average the relative-error traces of every solver over all cells and
    write them to ``path``.

    Traces missing from ``traces_dir`` (failed runs) are skipped, as are
    solvers left without any usable series.

    Returns:
        The written path, or None when no solver had a usable series
    """
    traces_dir = Path(traces_dir)
    series: Dict[str, List[List[Tuple[float, float]]]] = {
        entry.name: [] for entry in spec.solvers
    }
    for cell in experiment_cells(spec):
        x_true = None
        for entry in spec.solvers:
            trace_path = traces_dir / f"{cell.label}_{entry.name}.csv"
            if not trace_path.exists():
                continue
            if x_true is None:
                x_true = cell.instance(spec).x_true
            try:
                series[entry.name].append(
                    relative_error_trace(read_trace_csv(trace_path), x_true)
                )
            except (MissingGroundTruthError, InvalidParameterError) as e:
                logger.warning(
                    f"Skipping error series of {trace_path.name}: {e}",
                    extra={"solver": entry.name, "cell": cell.label},
                )

    averages = {
        name: average_error_traces(runs, spec.error_grid_points)
        for name, runs in series.items()
        if runs
    }
    if not averages:
        return None
    out = write_error_csv(averages, path)
    logger.info(
        f"Wrote averaged error series of {len(averages)} solvers to {out}",
        extra={"solvers": list(averages)},
    )
    return out


async def run_experiment_async(
    spec: ExperimentSpec, out_dir: PathLike, workers: Optional[int] = None
) -> Path:
    """
    Run every cell of the spec, up to ``workers`` cells at a time.

    Rows are merged in cell order, so the file does not depend on
    scheduling.

    Returns:
        Path of the written results.csv
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces_dir = None
    if spec.write_traces:
        traces_dir = out_dir / "traces"
        traces_dir.mkdir(exist_ok=True)

    workers = workers or get_settings().bench_workers
    semaphore = asyncio.Semaphore(max(1, workers))
    cells = experiment_cells(spec)

    async def bounded(index: int, cell: Cell) -> List[ResultRow]:
        async with semaphore:
            rows = await asyncio.to_thread(run_cell, spec, cell, traces_dir)
        logger.info(
            f"Finished cell {cell.label}",
            extra={
                "cell": cell.label,
                "progress": f"{index + 1}/{len(cells)}",
                "reached": sum(r.reached for r in rows),
            },
        )
        return rows

    logger.info(
        f"Running {len(cells)} cells x {len(spec.solvers)} solvers",
        extra={"cells": len(cells), "workers": workers},
    )
    per_cell = await asyncio.gather(
        *[bounded(i, cell) for i, cell in enumerate(cells)]
    )
    rows = [row for cell_rows in per_cell for row in cell_rows]
    path = write_results_csv(rows, out_dir / "results.csv")
    logger.info(
        f"Wrote {len(rows)} result rows to {path}",
        extra={
            "rows": len(rows),
            "failures": sum(not r.reached for r in rows),
        },
    )
    if traces_dir is not None:
        await asyncio.to_thread(
            write_error_averages, spec, traces_dir, out_dir / "errors.csv"
        )
    return path


def run_experiment(
    spec: ExperimentSpec, out_dir: PathLike, workers: Optional[int] = None
) -> Path:
    """Blocking wrapper around run_experiment_async."""
    return asyncio.run(run_experiment_async(spec, out_dir, workers))
