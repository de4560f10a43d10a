"""
Active-set estimates for l1-regularized least squares.

The main estimate splits the indices at a point x into an estimated active
set A(x) (coordinates predicted zero at the optimum) and a non-active set
N(x):

    N(x) = {i: max(0, x_i) > eps (tau + g_i)}
         U {i: max(0, -x_i) > eps (tau - g_i)}

For eps below 1/lambda_max(A^T A), zeroing x on A(x) decreases f by at least
||y - x||^2 / (2 eps). The Byrd, Yuan and ISTA estimates are provided for
comparison; they do not carry that decrease guarantee.
"""

import numbers
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np

from fastbcda.core.errors import InvalidParameterError
from fastbcda.core.logging_config import get_logger
from fastbcda.schemas.solver import EstimateParams, Strategy
from fastbcda.solvers.blocksolve import phi_vector
from fastbcda.solvers.problem import Instance, SolverState, apply_block_delta

logger = get_logger(__name__)

EQ_TOL_FACTOR = 1e-10


@dataclass(frozen=True)
class EstimateResult:
    """Partition of {0..n-1} into estimated active and non-active indices."""
    active: np.ndarray
    nonactive: np.ndarray
    epsilon_used: Optional[float] = None

    @classmethod
    def from_mask(
        cls, nonactive_mask: np.ndarray, epsilon_used: Optional[float] = None
    ) -> "EstimateResult":
        return cls(
            active=np.flatnonzero(~nonactive_mask),
            nonactive=np.flatnonzero(nonactive_mask),
            epsilon_used=epsilon_used,
        )


class OptimalSignSets(NamedTuple):
    """Index sets describing an optimal point x*."""
    active: np.ndarray         # x*_i = 0
    strict_active: np.ndarray  # x*_i = 0 and |g_i| < tau - margin
    e_plus: np.ndarray         # x*_i >= 0 and g_i = -tau
    e_minus: np.ndarray        # x*_i <= 0 and g_i = tau


def multiplier_values(
    inst: Instance, x: np.ndarray, g: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Multiplier functions lambda = g + tau and mu = tau - g."""
    return g + inst.tau, inst.tau - g


def _nonactive_mask(
    x: np.ndarray, g: np.ndarray, tau: float, epsilon: float
) -> np.ndarray:
    return (np.maximum(0.0, x) > epsilon * (tau + g)) | (
        np.maximum(0.0, -x) > epsilon * (tau - g)
    )


def estimate(
    inst: Instance,
    x: np.ndarray,
    g: np.ndarray,
    params: Union[EstimateParams, float],
) -> EstimateResult:
    """
    Active/non-active estimate at x for the given epsilon.

    Args:
        inst: Problem instance
        x: Current point
        g: Gradient of the smooth part at x
        params: EstimateParams or a bare epsilon

    Returns:
        EstimateResult with sorted index arrays
    """
    epsilon = (
        float(params) if isinstance(params, numbers.Real) else params.epsilon
    )
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    return EstimateResult.from_mask(
        _nonactive_mask(x, g, inst.tau, epsilon), epsilon_used=epsilon
    )


def estimate_comparison(
    inst: Instance,
    x: np.ndarray,
    g: np.ndarray,
    strategy: Union[Strategy, str],
    aux: Optional[float] = None,
) -> EstimateResult:
    """
    Comparison estimates from the literature.

    Args:
        strategy: Byrd, Yuan, Ista or Ours
        aux: Yuan's M >= 0, or epsilon for Ista / Ours; unused for Byrd

    Raises:
        InvalidParameterError: On an unknown strategy, a negative M or a
            missing auxiliary value
    """
    try:
        strategy = Strategy(strategy)
    except ValueError as e:
        raise InvalidParameterError(
            f"unknown strategy {strategy!r}", code="unknown_strategy"
        ) from e
    tau = inst.tau

    if strategy is Strategy.byrd:
        tol_eq = EQ_TOL_FACTOR * (1.0 + tau)
        active = (
            ((x == 0) & (g > -tau) & (g < tau))
            | ((x < 0) & (np.abs(g + tau) <= tol_eq))
            | ((x > 0) & (np.abs(g - tau) <= tol_eq))
        )
        return EstimateResult.from_mask(~active)

    if aux is None:
        raise InvalidParameterError(
            f"strategy {strategy.value} needs an auxiliary value"
        )

    if strategy is Strategy.yuan:
        M = float(aux)
        if M < 0:
            raise InvalidParameterError(f"M must be >= 0, got {M}")
        active = (x == 0) & (g > -tau + M) & (g < tau - M)
        return EstimateResult.from_mask(~active)

    epsilon = float(aux)
    if strategy is Strategy.ista:
        active = (epsilon * (-tau + g) <= x) & (x <= epsilon * (tau + g))
        return EstimateResult.from_mask(~active, epsilon_used=epsilon)

    return estimate(inst, x, g, epsilon)


def yuan_violation_scalar(
    inst: Instance,
    x_prev: Optional[np.ndarray] = None,
    g_prev: Optional[np.ndarray] = None,
) -> float:
    """Yuan's M: min(tau/2, max |Phi(x_prev)|), or tau/2 without history."""
    half_tau = 0.5 * inst.tau
    if x_prev is None or g_prev is None:
        return half_tau
    return min(half_tau, float(np.abs(phi_vector(inst, x_prev, g_prev)).max()))


def set_active_to_zero(
    inst: Instance, state: SolverState, active: np.ndarray
) -> SolverState:
    """
    Zero x on the active indices, updating the residual in place.

    Returns the same state object.
    """
    active = np.asarray(active, dtype=np.intp)
    if active.size == 0:
        return state
    nz = active[state.x[active] != 0.0]
    if nz.size:
        apply_block_delta(state, nz, -state.x[nz])
    return state


def epsilon_linesearch(
    inst: Instance,
    state: SolverState,
    params: EstimateParams,
    g: Optional[np.ndarray] = None,
) -> Tuple[EstimateResult, SolverState]:
    """
    Find the largest eps = theta^h * eps_bar whose zeroed point y satisfies
    f(y) <= f(x) - gamma ||y - x||^2.

    The input state is left untouched; the returned state is a new zeroed
    state. When h reaches h_max nothing is zeroed: the returned estimate only
    marks as active the coordinates that are already zero, so y = x.
    """
    if g is None:
        g = state.gradient
    x = state.x
    f_x = state.f
    eps = params.eps_bar
    for h in range(params.h_max + 1):
        eps = params.theta**h * params.eps_bar
        est = estimate(inst, x, g, eps)
        trial = set_active_to_zero(inst, state.copy(), est.active)
        step_sq = float(np.dot(trial.x - x, trial.x - x))
        if trial.f <= f_x - params.gamma * step_sq:
            if h:
                logger.debug(
                    f"epsilon line search accepted h={h}",
                    extra={"h": h, "epsilon": eps},
                )
            return est, trial

    logger.info(
        f"epsilon line search hit h_max={params.h_max}; skipping zeroing",
        extra={"h_max": params.h_max, "epsilon": eps},
    )
    est = estimate(inst, x, g, eps)
    already_zero = x[est.active] == 0.0
    kept_active = est.active[already_zero]
    nonactive = np.union1d(est.nonactive, est.active[~already_zero])
    return (
        EstimateResult(
            active=kept_active, nonactive=nonactive, epsilon_used=eps
        ),
        state.copy(),
    )


def split_nonactive_by_sign(
    inst: Instance, x: np.ndarray, g: np.ndarray, nonactive: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Split N into N+ = {g_i <= 0} and N- = {g_i > 0}."""
    nonactive = np.asarray(nonactive, dtype=np.intp)
    negative_grad = g[nonactive] <= 0
    return nonactive[negative_grad], nonactive[~negative_grad]


def optimal_sign_sets(
    inst: Instance,
    x_star: np.ndarray,
    g_star: np.ndarray,
    tol: float = 1e-8,
    zero_tol: float = 0.0,
) -> OptimalSignSets:
    """
    Active and sign sets of an (approximate) optimum.

    Equalities g_i = +-tau are tested to within ``tol``; ``zero_tol`` treats
    tiny components of x* as zero.
    """
    tau = inst.tau
    is_zero = np.abs(x_star) <= zero_tol
    return OptimalSignSets(
        active=np.flatnonzero(is_zero),
        strict_active=np.flatnonzero(is_zero & (np.abs(g_star) < tau - tol)),
        e_plus=np.flatnonzero(
            (is_zero | (x_star > 0)) & (np.abs(g_star + tau) <= tol)
        ),
        e_minus=np.flatnonzero(
            (is_zero | (x_star < 0)) & (np.abs(g_star - tau) <= tol)
        ),
    )
