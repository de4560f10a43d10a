"""Solver configuration schemas."""

from enum import Enum
from typing import Literal, Optional

from pydantic import BaseModel, Field


class Strategy(str, Enum):
    """Active-set estimate used to pick the coordinates to zero."""
    ours = "Ours"
    byrd = "Byrd"
    yuan = "Yuan"
    ista = "Ista"


class Measure(str, Enum):
    """Optimality measure used to order the non-active indices."""
    phi = "Phi"
    first_order = "FirstOrder"


class EstimateParams(BaseModel):
    """Parameters of the active-set estimate and its adaptive ε search."""
    epsilon: float = Field(default=1e-4, gt=0, description="Fixed ε")
    theta: float = Field(
        default=0.5, gt=0, lt=1, description="ε reduction factor"
    )
    eps_bar: float = Field(
        default=1e-2, gt=0, description="Starting ε of the line search"
    )
    gamma: float = Field(
        default=1e-6, gt=0, description="Sufficient decrease coefficient"
    )
    h_max: int = Field(
        default=60, ge=0, description="Cap on the ε reduction count"
    )
    strategy: Strategy = Field(default=Strategy.ours)


class SolverConfig(BaseModel):
    """Configuration of one active-set block coordinate descent run."""
    label: str = Field(default="fast1", description="Name used in traces")
    block_size: Literal[1, 2] = Field(default=1, description="Block size r")
    s_fraction: float = Field(
        default=0.8, gt=0, description="s as a fraction of |N^k| or T"
    )
    s_absolute: Optional[int] = Field(
        default=None, ge=1, description="Fixed s, overrides s_fraction"
    )
    s_from_truth: bool = Field(
        default=False,
        description="Scale s_fraction by the true spike count when known",
    )
    measure: Measure = Field(default=Measure.phi)
    estimate_params: EstimateParams = Field(default_factory=EstimateParams)
    adaptive_eps: bool = Field(default=False)
    enhanced: bool = Field(default=False)
    xi_fraction: float = Field(
        default=0.05, gt=0, le=1, description="Enhanced-stage ξ / n"
    )
    tol: float = Field(default=1e-6, gt=0, description="KKT tolerance")
    max_outer: int = Field(default=1000, ge=1)
    cg_tol: float = Field(default=1e-10, gt=0)
    cg_max_iter: int = Field(default=1000, ge=1)
    resync_every: int = Field(
        default=100,
        ge=0,
        description="Dense residual recompute period; 0 disables",
    )
    track_error: bool = Field(
        default=True, description="Record relative error when x_true exists"
    )


class ProxConfig(BaseModel):
    """Configuration of the ISTA / FISTA baselines."""
    label: str = Field(default="fista")
    step_coeff: float = Field(
        default=1.0, gt=0, description="Step size as a multiple of 1/L"
    )
    tol: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=5000, ge=1)
    lipschitz_margin: float = Field(
        default=1e-6,
        ge=0,
        description="Relative inflation of the power-iteration estimate",
    )
    power_iter_tol: float = Field(default=1e-10, gt=0)
    power_iter_max: int = Field(default=10_000, ge=1)
    track_error: bool = Field(default=True)
