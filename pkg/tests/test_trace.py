"""Tests for run traces and the trace CSV."""

import math

from fastbcda.schemas.solver import SolverConfig
from fastbcda.schemas.trace import TraceRecord
from fastbcda.solvers.driver import solve
from fastbcda.solvers.trace import (
    TRACE_COLUMNS,
    RunTrace,
    read_trace_csv,
    write_trace_csv,
)


def test_trace_properties():
    """Test trace accessors over its records."""
    trace = RunTrace(solver="fast1")
    trace.append(TraceRecord(iter=0, f=2.0, elapsed_s=0.0, kkt_violation=1.0))
    trace.append(
        TraceRecord(
            iter=1, f=1.5, elapsed_s=0.1, kkt_violation=0.2, n_nonactive=6
        )
    )
    assert trace.f_values.tolist() == [2.0, 1.5]
    assert trace.nonactive_counts == [6]
    assert trace.last.iter == 1


def test_trace_csv_keeps_values_exactly(tmp_path, tiny_p1):
    """Test trace files read back bit for bit."""
    cfg = SolverConfig(enhanced=True, max_outer=5000)
    _, trace = solve(tiny_p1, cfg)
    path = write_trace_csv(trace, tmp_path / "fast1.csv")

    header = path.read_text().splitlines()[0]
    assert tuple(header.split(",")) == TRACE_COLUMNS

    loaded = read_trace_csv(path)
    assert loaded.solver == "fast1"
    assert loaded.f_values.tolist() == trace.f_values.tolist()
    for before, after in zip(trace.records, loaded.records):
        assert after.enhanced == before.enhanced
        assert after.n_nonactive == before.n_nonactive
        assert after.epsilon == before.epsilon
        assert math.isclose(after.rel_error, before.rel_error)
