"""Pydantic models for configuration objects and serializable records."""

from fastbcda.schemas.bench import (
    ExperimentSpec,
    ProfileCurve,
    ResultRow,
    SolverEntry,
)
from fastbcda.schemas.common import ProblemKind, SolveStatus
from fastbcda.schemas.solver import (
    EstimateParams,
    Measure,
    ProxConfig,
    SolverConfig,
    Strategy,
)
from fastbcda.schemas.trace import TraceRecord
