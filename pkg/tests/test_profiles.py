"""Tests for performance profiles and relative-error series."""

import csv
import math

import numpy as np
import pytest

from fastbcda.bench.profiles import (
    ERROR_COLUMNS,
    PROFILE_COLUMNS,
    average_error_traces,
    performance_profile,
    relative_error_trace,
    write_error_csv,
    write_profile_csv,
)
from fastbcda.core.errors import (
    BenchmarkError,
    InvalidParameterError,
    MissingGroundTruthError,
)
from fastbcda.schemas.bench import ResultRow
from fastbcda.schemas.common import ProblemKind
from fastbcda.schemas.solver import SolverConfig
from fastbcda.solvers.driver import solve


def _row(seed: int, solver: str, time_s: float, reached: bool = True):
    return ResultRow(
        kind=ProblemKind.P1,
        n=64,
        m=16,
        rho=0.1,
        seed=seed,
        solver=solver,
        time_s=time_s if reached else math.nan,
        iters=1,
        final_f=1.0,
        reached=reached,
    )


def _curves(rows, **kwargs):
    return {c.solver: c for c in performance_profile(rows, **kwargs)}


def test_two_solvers_two_problems():
    """Times (1, 2) and (4, 2) give ratios A = (1, 2), B = (2, 1)."""
    rows = [_row(0, "A", 1.0), _row(0, "B", 2.0)]
    rows += [_row(1, "A", 4.0), _row(1, "B", 2.0)]
    curves = _curves(rows)

    assert curves["A"].ratios == [1.0, 2.0, 4.0]
    assert curves["A"].fractions == [0.5, 1.0, 1.0]
    assert curves["B"].fractions == [0.5, 1.0, 1.0]
    assert curves["A"].log2_ratios == [0.0, 1.0, 2.0]


def test_always_fastest_solver_starts_at_one():
    """Test the fastest solver starts its curve at 1."""
    rows = []
    for seed in range(4):
        rows += [_row(seed, "A", 1.0), _row(seed, "B", 1.5 + seed)]
    curves = _curves(rows)
    assert curves["A"].fractions[0] == 1.0
    assert curves["B"].fractions[0] == 0.0
    assert curves["B"].fractions[-1] == 1.0


def test_failures_cap_the_curve():
    """A problem nobody solves counts against every solver."""
    rows = [_row(0, "A", 0, reached=False), _row(0, "B", 0, reached=False)]
    rows += [_row(1, "A", 1.0), _row(1, "B", 3.0)]
    curves = _curves(rows)

    assert curves["A"].ratios == [1.0, 3.0, 6.0]
    assert curves["A"].fractions == [0.5, 0.5, 0.5]
    assert curves["B"].fractions == [0.0, 0.5, 0.5]


def test_explicit_failure_penalty_is_last_breakpoint():
    """Test a given penalty closes every curve."""
    rows = [_row(0, "A", 1.0), _row(0, "B", 0, reached=False)]
    curves = _curves(rows, failure_penalty=10.0)
    assert curves["B"].ratios[-1] == 10.0
    assert curves["B"].fractions == [0.0, 0.0]


def test_zero_times_are_floored():
    """Test zero times do not divide by zero."""
    rows = [_row(0, "A", 0.0), _row(0, "B", 0.0)]
    curves = _curves(rows)
    assert curves["A"].fractions[0] == 1.0
    assert curves["B"].fractions[0] == 1.0


def test_missing_solver_counts_as_failure():
    """Test a solver absent from a problem failed on it."""
    rows = [_row(0, "A", 1.0), _row(0, "B", 2.0), _row(1, "A", 1.0)]
    curves = _curves(rows)
    assert curves["A"].fractions[-1] == 1.0
    assert curves["B"].fractions[-1] == 0.5


def test_profile_errors():
    """Test empty, single-solver and bad-penalty inputs raise."""
    with pytest.raises(BenchmarkError) as exc:
        performance_profile([])
    assert exc.value.code == "empty_results"
    with pytest.raises(BenchmarkError) as exc:
        performance_profile([_row(0, "A", 1.0)])
    assert exc.value.code == "too_few_solvers"
    with pytest.raises(InvalidParameterError):
        performance_profile(
            [_row(0, "A", 1.0), _row(0, "B", 1.0)], failure_penalty=0.5
        )


def test_write_profile_csv(tmp_path):
    """Test curves are written in long format."""
    rows = [_row(0, "A", 1.0), _row(0, "B", 2.0)]
    curves = performance_profile(rows)
    path = write_profile_csv(curves, tmp_path / "profile.csv")

    with path.open(newline="") as fh:
        lines = list(csv.reader(fh))
    assert tuple(lines[0]) == PROFILE_COLUMNS
    assert len(lines) == 1 + sum(len(c.ratios) for c in curves)
    assert lines[1] == ["A", "1.0", "0.0", "1.0"]


def test_relative_error_trace_starts_at_one(tiny_p1):
    """Test the series starts at error 1 with sorted times."""
    _, trace = solve(tiny_p1, SolverConfig(max_outer=5000))
    series = relative_error_trace(trace, tiny_p1.x_true)
    assert series[0][1] == 1.0
    assert len(series) == len(trace.records)
    times = [t for t, _ in series]
    assert times == sorted(times)


def test_relative_error_trace_needs_ground_truth(tiny_p1, random_instance):
    """Test missing x_true or untracked traces raise."""
    _, trace = solve(random_instance, SolverConfig(max_outer=5))
    with pytest.raises(MissingGroundTruthError):
        relative_error_trace(trace, None)
    with pytest.raises(MissingGroundTruthError) as exc:
        relative_error_trace(trace, np.ones(random_instance.n))
    assert exc.value.code == "untracked_error"

    _, tracked = solve(tiny_p1, SolverConfig(max_outer=5))
    with pytest.raises(InvalidParameterError):
        relative_error_trace(tracked, np.zeros(tiny_p1.n))


def test_average_error_traces():
    """Test averaging on a three-point grid."""
    first = [(1.0, 1.0), (1.5, 0.5), (4.0, 0.25)]
    second = [(1.0, 0.8), (3.0, 0.2)]
    grid, mean = average_error_traces([first, second], grid_points=3)

    assert grid[0] == 1.0 and grid[-1] == 4.0
    assert mean == pytest.approx([0.9, 0.65, 0.225])


def test_average_error_traces_errors():
    """Test empty input and a one-point grid raise."""
    with pytest.raises(BenchmarkError):
        average_error_traces([])
    with pytest.raises(InvalidParameterError):
        average_error_traces([[(1.0, 1.0)]], grid_points=1)


def test_write_error_csv(tmp_path):
    """Test averaged series are written in long format, solver by solver."""
    averages = {
        "A": (np.array([1.0, 2.0]), np.array([1.0, 0.5])),
        "B": (np.array([1.0, 2.0]), np.array([1.0, 0.25])),
    }
    path = write_error_csv(averages, tmp_path / "errors.csv")

    with path.open(newline="") as fh:
        lines = list(csv.reader(fh))
    assert tuple(lines[0]) == ERROR_COLUMNS
    assert lines[1:] == [
        ["A", "1.0", "1.0"],
        ["A", "2.0", "0.5"],
        ["B", "1.0", "1.0"],
        ["B", "2.0", "0.25"],
    ]
