"""Per-iteration trace record."""

from typing import Optional

from pydantic import BaseModel, Field


class TraceRecord(BaseModel):
    """State of one iterate; iteration 0 is the starting point."""
    iter: int = Field(..., ge=0)
    f: float = Field(..., description="Objective at the iterate")
    elapsed_s: float = Field(..., ge=0)
    n_nonactive: Optional[int] = Field(
        None, description="|N^k| of the estimate computed at this iterate"
    )
    n_active: Optional[int] = None
    kkt_violation: float
    epsilon: Optional[float] = None
    enhanced: bool = Field(
        False, description="Iterate produced by the reduced smooth solve"
    )
    rel_error: Optional[float] = Field(
        None, description="||x - x_true|| / ||x_true||"
    )
