"""Enumerations shared across the solver and benchmark layers."""

from enum import Enum


class ProblemKind(str, Enum):
    """Synthetic instance family."""
    P1 = "P1"          # Gaussian matrix, scaled columns
    P2 = "P2"          # sparse uniform matrix, scaled columns
    custom = "custom"  # hand-built or loaded data


class SolveStatus(str, Enum):
    """Terminal state of a solver run."""
    optimal = "Optimal"
    max_iter = "MaxIter"
    target_reached = "TargetReached"
    stalled = "Stalled"
