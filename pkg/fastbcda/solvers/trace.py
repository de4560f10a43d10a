"""Run traces, final solutions and the trace CSV format."""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from fastbcda.schemas.common import SolveStatus
from fastbcda.schemas.trace import TraceRecord

TRACE_COLUMNS = (
    "iter",
    "f",
    "elapsed_s",
    "n_nonactive",
    "kkt_violation",
    "epsilon",
    "enhanced",
    "rel_error",
)


@dataclass
class Solution:
    """Final iterate of a run."""
    x: np.ndarray
    f: float
    status: SolveStatus
    iterations: int
    kkt_violation: float
    elapsed_s: float
    degraded: bool = False


@dataclass
class RunTrace:
    """Per-iterate records of one run plus its final solution."""
    solver: str
    records: List[TraceRecord] = field(default_factory=list)
    solution: Optional[Solution] = None

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    @property
    def f_values(self) -> np.ndarray:
        return np.array([r.f for r in self.records])

    @property
    def nonactive_counts(self) -> List[int]:
        return [
            r.n_nonactive for r in self.records if r.n_nonactive is not None
        ]

    @property
    def last(self) -> TraceRecord:
        return self.records[-1]


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_trace_csv(trace: RunTrace, path: Union[str, Path]) -> Path:
    """Write a trace with a header row; floats carry 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for record in trace.records:
            writer.writerow(
                [_cell(getattr(record, col)) for col in TRACE_COLUMNS]
            )
    return path


def read_trace_csv(path: Union[str, Path], solver: str = "") -> RunTrace:
    """Read a trace written by write_trace_csv."""
    trace = RunTrace(solver=solver or Path(path).stem)
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            data = {k: v for k, v in row.items() if v != ""}
            if "enhanced" in data:
                data["enhanced"] = data["enhanced"] == "1"
            trace.append(TraceRecord.model_validate(data))
    return trace
