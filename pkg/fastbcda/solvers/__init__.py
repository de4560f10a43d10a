"""
Solver registry.

Maps variant names to configured solver entry points. Every entry returns
(Solution, RunTrace) and accepts an optional objective target, so the
benchmark harness can treat all of them alike.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from fastbcda.core.errors import InvalidParameterError
from fastbcda.schemas.solver import ProxConfig, SolverConfig
from fastbcda.solvers import baselines, driver
from fastbcda.solvers.problem import Instance
from fastbcda.solvers.trace import RunTrace, Solution

AnyConfig = Union[SolverConfig, ProxConfig]

# Keys accepted at the top level and routed into estimate_params
_ESTIMATE_KEYS = (
    "epsilon",
    "theta",
    "eps_bar",
    "gamma",
    "h_max",
    "strategy",
)


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@dataclass(frozen=True)
class RegisteredSolver:
    """A named solver family with its preset configuration."""
    name: str
    family: str  # "bcda", "ista" or "fista"
    defaults: Dict[str, Any] = field(default_factory=dict)

    def config(self, **overrides: Any) -> AnyConfig:
        """
        Build the configuration of this variant.

        Args:
            **overrides: Field overrides; for BCDA variants the estimate
                fields (epsilon, theta, ...) may be given at the top level

        Returns:
            SolverConfig for BCDA variants, ProxConfig for baselines
        """
        data = {"label": self.name, **self.defaults}
        if self.family == "bcda":
            nested = {
                k: overrides.pop(k) for k in _ESTIMATE_KEYS if k in overrides
            }
            if nested:
                overrides = _merge(overrides, {"estimate_params": nested})
            return SolverConfig.model_validate(_merge(data, overrides))
        return ProxConfig.model_validate(_merge(data, overrides))

    def run(
        self,
        inst: Instance,
        f_target: Optional[float] = None,
        max_iter: Optional[int] = None,
        x0: Optional[np.ndarray] = None,
        **overrides: Any,
    ) -> Tuple[Solution, RunTrace]:
        """
        Run the variant, to optimality or to f_target when given.

        max_iter caps max_outer (BCDA) or max_iter (baselines) unless the
        overrides set that field themselves.
        """
        if max_iter is not None:
            key = "max_outer" if self.family == "bcda" else "max_iter"
            overrides.setdefault(key, max_iter)
        cfg = self.config(**overrides)
        if isinstance(cfg, SolverConfig):
            if f_target is None:
                return driver.solve(inst, cfg, x0=x0)
            return driver.solve_to_target(inst, cfg, f_target, x0=x0)
        prox: Callable[..., Tuple[Solution, RunTrace]] = (
            baselines.fista_solve
            if self.family == "fista"
            else baselines.ista_solve
        )
        return prox(inst, cfg, f_target=f_target, x0=x0)


def _bcda(name: str, r: int, **extra: Any) -> RegisteredSolver:
    eps, s = (1e-4, 0.8) if r == 1 else (1e-5, 0.65)
    return RegisteredSolver(
        name=name,
        family="bcda",
        defaults={
            "block_size": r,
            "s_fraction": s,
            "estimate_params": {"epsilon": eps},
            **extra,
        },
    )


SOLVER_REGISTRY: Dict[str, RegisteredSolver] = {
    # Fixed-epsilon active-set BCDA
    "fast1": _bcda("fast1", 1),
    "fast2": _bcda("fast2", 2),

    # With the reduced smooth solve once |N| settles
    "fast1-e": _bcda("fast1-e", 1, enhanced=True),
    "fast2-e": _bcda("fast2-e", 2, enhanced=True),

    # Epsilon chosen by line search every iteration
    "fast1-eps": _bcda("fast1-eps", 1, adaptive_eps=True),
    "fast2-eps": _bcda("fast2-eps", 2, adaptive_eps=True),

    # Proximal gradient baselines
    "ista": RegisteredSolver(name="ista", family="ista"),
    "fista": RegisteredSolver(name="fista", family="fista"),
}


def get_solver(name: str) -> RegisteredSolver:
    """
    Look up a registered solver.

    Raises:
        InvalidParameterError: If the name is not registered
    """
    try:
        return SOLVER_REGISTRY[name]
    except KeyError as e:
        raise InvalidParameterError(
            f"unknown solver {name!r}; known: {', '.join(list_solvers())}",
            code="unknown_solver",
        ) from e


def list_solvers() -> list[str]:
    """Registered solver names in registration order."""
    return list(SOLVER_REGISTRY.keys())


def get_solvers_by_prefix(prefix: str) -> Dict[str, RegisteredSolver]:
    """All registered solvers whose name starts with prefix."""
    return {
        name: entry
        for name, entry in SOLVER_REGISTRY.items()
        if name.startswith(prefix)
    }
