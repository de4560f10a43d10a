"""
Performance profiles and relative-error series.

For problem p and solver s the performance ratio is r_{p,s} = t_{p,s} /
min_s' t_{p,s'} over the solvers that reached the target on p. The profile
of s is the step function T -> |{p: r_{p,s} <= T}| / |problems|; runs that
failed never count, so each curve ends at (solved runs) / (total runs).
"""

import csv
import math
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from fastbcda.core.errors import (
    BenchmarkError,
    InvalidParameterError,
    MissingGroundTruthError,
)
from fastbcda.core.logging_config import get_logger
from fastbcda.schemas.bench import ProfileCurve, ResultRow
from fastbcda.solvers.trace import RunTrace

logger = get_logger(__name__)

TIME_FLOOR = 1e-12
PROFILE_COLUMNS = ("solver", "ratio", "log2_ratio", "fraction")
ERROR_COLUMNS = ("solver", "time_s", "rel_error")

Series = Sequence[Tuple[float, float]]


def _problem_times(
    results: Sequence[ResultRow],
) -> Tuple[List[str], Dict[tuple, Dict[str, Optional[float]]]]:
    solvers: List[str] = []
    problems: Dict[tuple, Dict[str, Optional[float]]] = OrderedDict()
    for row in results:
        if row.solver not in solvers:
            solvers.append(row.solver)
        ok = row.reached and math.isfinite(row.time_s)
        problems.setdefault(row.problem_key, {})[row.solver] = (
            max(row.time_s, TIME_FLOOR) if ok else None
        )
    return solvers, problems


def performance_profile(
    results: Sequence[ResultRow], failure_penalty: Optional[float] = None
) -> List[ProfileCurve]:
    """
    Dolan-More performance profiles of the solvers in ``results``.

    Args:
        results: Result rows; a solver missing from a problem counts as a
            failure on it
        failure_penalty: Ratio assigned to failures; defaults to twice the
            largest finite ratio. It closes every curve as its last
            breakpoint without raising it.

    Returns:
        One curve per solver in order of first appearance, all sharing the
        sorted union of the finite ratios as breakpoints

    Raises:
        BenchmarkError: On empty results or fewer than two solvers
    """
    if not results:
        raise BenchmarkError("no results to profile", code="empty_results")
    solvers, problems = _problem_times(results)
    if len(solvers) < 2:
        raise BenchmarkError(
            f"a profile needs at least two solvers, got {solvers}",
            code="too_few_solvers",
        )

    ratios = {s: np.full(len(problems), np.inf) for s in solvers}
    for p, times in enumerate(problems.values()):
        finite = [t for t in times.values() if t is not None]
        if not finite:
            continue
        best = min(finite)
        for s in solvers:
            t = times.get(s)
            if t is not None:
                ratios[s][p] = t / best

    all_finite = np.concatenate([r[np.isfinite(r)] for r in ratios.values()])
    if failure_penalty is None:
        largest = float(all_finite.max()) if all_finite.size else 1.0
        failure_penalty = 2.0 * largest
    elif not failure_penalty >= 1.0:
        raise InvalidParameterError(
            f"failure_penalty must be >= 1, got {failure_penalty}"
        )

    breakpoints = np.unique(np.append(all_finite, failure_penalty))
    n_problems = len(problems)
    curves = []
    for s in solvers:
        r = np.sort(ratios[s][np.isfinite(ratios[s])])
        counts = np.searchsorted(r, breakpoints, side="right")
        curves.append(
            ProfileCurve(
                solver=s,
                ratios=breakpoints.tolist(),
                log2_ratios=np.log2(breakpoints).tolist(),
                fractions=(counts / n_problems).tolist(),
            )
        )
    logger.info(
        f"Profiled {len(solvers)} solvers on {n_problems} problems",
        extra={"failure_penalty": failure_penalty},
    )
    return curves


def relative_error_trace(
    trace: RunTrace, x_true: Optional[np.ndarray]
) -> List[Tuple[float, float]]:
    """
    (elapsed_s, ||x^k - x_true|| / ||x_true||) pairs of a run.

    The driver and the baselines log the error on the fly when the instance
    carries x_true, so the trace must have been recorded with track_error.

    Raises:
        MissingGroundTruthError: If x_true is absent or the trace carries no
            error values
    """
    if x_true is None:
        raise MissingGroundTruthError("relative error needs x_true")
    if not np.any(np.asarray(x_true)):
        raise InvalidParameterError("x_true is zero; relative error undefined")
    if not trace.records or any(r.rel_error is None for r in trace.records):
        raise MissingGroundTruthError(
            f"trace of {trace.solver} was recorded without error tracking",
            code="untracked_error",
        )
    return [(r.elapsed_s, float(r.rel_error)) for r in trace.records]


def average_error_traces(
    series: Sequence[Series], grid_points: int = 200
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Average several error series on a common time grid.

    The grid has ``grid_points`` log-spaced times from the earliest first
    sample to the latest last sample. Each series is read with last-value
    interpolation (its first value before its first sample).

    Returns:
        (grid, mean error at each grid point)
    """
    if not series or any(len(s) == 0 for s in series):
        raise BenchmarkError("cannot average empty error series")
    if grid_points < 2:
        raise InvalidParameterError("grid_points must be at least 2")

    t_lo = max(min(s[0][0] for s in series), TIME_FLOOR)
    t_hi = max(max(s[-1][0] for s in series), t_lo)
    grid = np.geomspace(t_lo, t_hi, grid_points)

    stacked = np.empty((len(series), grid_points))
    for i, s in enumerate(series):
        times = np.array([t for t, _ in s])
        values = np.array([v for _, v in s])
        idx = np.searchsorted(times, grid, side="right") - 1
        stacked[i] = values[np.clip(idx, 0, len(values) - 1)]
    return grid, stacked.mean(axis=0)


def write_profile_csv(
    curves: Sequence[ProfileCurve], path: Union[str, Path]
) -> Path:
    """Write curves in long format: solver, ratio, log2_ratio, fraction."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_COLUMNS)
        for curve in curves:
            for ratio, log2_ratio, fraction in zip(
                curve.ratios, curve.log2_ratios, curve.fractions
            ):
                writer.writerow(
                    [
                        curve.solver,
                        repr(ratio),
                        repr(log2_ratio),
                        repr(fraction),
                    ]
                )
    return path


def write_error_csv(
    averages: Mapping[str, Tuple[np.ndarray, np.ndarray]],
    path: Union[str, Path],
) -> Path:
    """Write averaged error series in long format, one row per grid time."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ERROR_COLUMNS)
        for solver, (grid, mean) in averages.items():
            for t, err in zip(grid.tolist(), mean.tolist()):
                writer.writerow([solver, repr(t), repr(err)])
    return path
