"""Benchmark protocol schemas."""

from typing import Any, Dict, List

from pydantic import BaseModel, Field, field_validator, model_validator

from fastbcda.schemas.common import ProblemKind


class SolverEntry(BaseModel):
    """A named registry solver plus configuration overrides."""
    name: str = Field(..., min_length=1)
    overrides: Dict[str, Any] = Field(default_factory=dict)


def _default_solvers() -> List[SolverEntry]:
    return [
        SolverEntry(name=name)
        for name in ("fast1", "fast2", "fast1-e", "fast2-e", "ista", "fista")
    ]


class ExperimentSpec(BaseModel):
    """Grid of synthetic instances and the solvers timed on each of them."""
    kinds: List[ProblemKind] = Field(
        default_factory=lambda: [ProblemKind.P1, ProblemKind.P2]
    )
    sizes: List[int] = Field(default_factory=lambda: [2**10, 2**12])
    rhos: List[float] = Field(default_factory=lambda: [0.01, 0.05, 0.1])
    seeds_per_cell: int = Field(default=5, ge=1)
    base_seed: int = Field(default=0, ge=0)
    solvers: List[SolverEntry] = Field(default_factory=_default_solvers)
    target_setter: str = Field(default="fast2")
    max_iter: int = Field(
        default=1000, ge=1, description="Iteration cap; hitting it is failure"
    )
    density: float = Field(default=0.5, gt=0, le=1)
    noise_var: float = Field(default=1e-3, ge=0)
    target_rtol: float = Field(default=1e-9, ge=0)
    s_from_truth: bool = Field(
        default=True,
        description="Size the BCDA block count by the true spike count",
    )
    write_traces: bool = Field(default=False)
    error_grid_points: int = Field(
        default=200, ge=2, description="Time grid of the averaged errors"
    )

    @field_validator("sizes")
    @classmethod
    def sizes_divisible_by_four(cls, sizes: List[int]) -> List[int]:
        if not sizes:
            raise ValueError("at least one size is required")
        for n in sizes:
            if n < 4 or n % 4:
                raise ValueError(f"n={n} must be a positive multiple of 4")
        return sizes

    @field_validator("rhos")
    @classmethod
    def rhos_in_range(cls, rhos: List[float]) -> List[float]:
        if not rhos or any(not 0 < rho <= 1 for rho in rhos):
            raise ValueError("rhos must be non-empty and lie in (0, 1]")
        return rhos

    @model_validator(mode="after")
    def check_solvers(self) -> "ExperimentSpec":
        names = [entry.name for entry in self.solvers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate solver names: {names}")
        if self.target_setter not in names:
            raise ValueError(
                f"target setter {self.target_setter!r} not in {names}"
            )
        return self

    @classmethod
    def desk(cls) -> "ExperimentSpec":
        """Desk-scale default grid."""
        return cls()

    @classmethod
    def full(cls) -> "ExperimentSpec":
        """Large grid: n up to 2^17, ten seeds per cell."""
        return cls(
            sizes=[2**14, 2**15, 2**16, 2**17],
            rhos=[0.01, 0.03, 0.05, 0.07, 0.1],
            seeds_per_cell=10,
        )


class ResultRow(BaseModel):
    """One (cell, solver) line of the results CSV."""
    kind: ProblemKind
    n: int
    m: int
    rho: float
    seed: int
    solver: str
    time_s: float
    iters: int
    final_f: float
    reached: bool

    @property
    def problem_key(self) -> tuple:
        return (self.kind.value, self.n, self.m, self.rho, self.seed)


class ProfileCurve(BaseModel):
    """Performance-profile step function of one solver."""
    solver: str
    ratios: List[float] = Field(default_factory=list)
    log2_ratios: List[float] = Field(default_factory=list)
    fractions: List[float] = Field(default_factory=list)
