"""ISTA and FISTA reference solvers."""

import math
import time
from typing import Optional, Tuple

import numpy as np

from fastbcda.core.errors import ConvergenceError, InvalidParameterError
from fastbcda.core.logging_config import get_logger, run_context
from fastbcda.schemas.common import SolveStatus
from fastbcda.schemas.solver import ProxConfig
from fastbcda.schemas.trace import TraceRecord
from fastbcda.solvers.blocksolve import kkt_max_violation, soft_threshold
from fastbcda.solvers.problem import Instance
from fastbcda.solvers.trace import RunTrace, Solution

logger = get_logger(__name__)


def lipschitz_constant(
    inst: Instance,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    seed: int = 0,
) -> float:
    """
    Estimate lambda_max(A^T A) by power iteration.

    Starts from a standard normal vector drawn with ``seed``, so the
    result is deterministic.

    Raises:
        ConvergenceError: If successive estimates do not agree to ``tol``
            (relative) within ``max_iter`` iterations
    """
    v = np.random.default_rng(seed).standard_normal(inst.n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = inst.A.T @ (inst.A @ v)
        lam_new = float(np.dot(v, w))
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            raise ConvergenceError("power iteration collapsed to zero")
        v = w / norm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            logger.debug(
                f"power iteration converged in {it} steps",
                extra={"lambda_max": lam_new, "iterations": it},
            )
            return lam_new
        lam = lam_new
    raise ConvergenceError(
        f"power iteration did not reach tol={tol} in {max_iter} steps"
    )


def ista_step(
    inst: Instance, x: np.ndarray, g: np.ndarray, L: float
) -> np.ndarray:
    """
    One proximal gradient step: soft threshold of u = x - g/L at tau/L.

    Raises:
        InvalidParameterError: If L <= 0
    """
    if not L > 0:
        raise InvalidParameterError(f"L must be positive, got {L}")
    return soft_threshold(x - g / L, inst.tau / L)


def _record(
    inst: Instance,
    k: int,
    x: np.ndarray,
    r: np.ndarray,
    g: np.ndarray,
    started_at: float,
    track: bool,
) -> TraceRecord:
    rel_error = None
    if track and inst.x_true is not None:
        scale = float(np.linalg.norm(inst.x_true))
        if scale > 0:
            rel_error = float(np.linalg.norm(x - inst.x_true)) / scale
    return TraceRecord(
        iter=k,
        f=float(0.5 * np.dot(r, r) + inst.tau * np.abs(x).sum()),
        elapsed_s=time.perf_counter() - started_at,
        n_nonactive=None,
        kkt_violation=kkt_max_violation(inst, x, g),
        rel_error=rel_error,
    )


def _status_for(
    record: TraceRecord, cfg: ProxConfig, f_target: Optional[float]
) -> Optional[SolveStatus]:
    if f_target is not None:
        return (
            SolveStatus.target_reached if record.f <= f_target else None
        )
    return SolveStatus.optimal if record.kkt_violation <= cfg.tol else None


def _prox_solve(
    inst: Instance,
    cfg: ProxConfig,
    accelerated: bool,
    f_target: Optional[float],
    x0: Optional[np.ndarray],
) -> Tuple[Solution, RunTrace]:
    started_at = time.perf_counter()
    lam = lipschitz_constant(inst, cfg.power_iter_tol, cfg.power_iter_max)
    L = lam * (1.0 + cfg.lipschitz_margin) / cfg.step_coeff

    A, b = inst.A, inst.b
    x = np.zeros(inst.n) if x0 is None else np.array(x0, dtype=np.float64)
    r = A @ x - b
    g = A.T @ r
    # Momentum point y and its gradient, kept by linearity
    y, g_y = x, g
    t = 1.0

    trace = RunTrace(solver=cfg.label)
    record = _record(inst, 0, x, r, g, started_at, cfg.track_error)
    trace.append(record)
    status = _status_for(record, cfg, f_target)

    k = 0
    while status is None and k < cfg.max_iter:
        k += 1
        x_new = ista_step(inst, y, g_y, L)
        r_new = A @ x_new - b
        g_new = A.T @ r_new
        if accelerated:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            y = x_new + beta * (x_new - x)
            g_y = g_new + beta * (g_new - g)
            t = t_new
        else:
            y, g_y = x_new, g_new
        x, r, g = x_new, r_new, g_new

        record = _record(inst, k, x, r, g, started_at, cfg.track_error)
        trace.append(record)
        status = _status_for(record, cfg, f_target)

    if status is None:
        status = SolveStatus.max_iter

    trace.solution = Solution(
        x=x.copy(),
        f=record.f,
        status=status,
        iterations=k,
        kkt_violation=record.kkt_violation,
        elapsed_s=time.perf_counter() - started_at,
    )
    logger.info(
        f"{cfg.label} finished: {status.value} after {k} iterations",
        extra={
            "status": status.value,
            "f": record.f,
            "kkt": record.kkt_violation,
            "lipschitz": L,
        },
    )
    return trace.solution, trace


def ista_solve(
    inst: Instance,
    cfg: ProxConfig,
    f_target: Optional[float] = None,
    x0: Optional[np.ndarray] = None,
) -> Tuple[Solution, RunTrace]:
    """Plain proximal gradient with step step_coeff / L; monotone in f."""
    with run_context(solver=cfg.label, instance=inst.name):
        return _prox_solve(inst, cfg, False, f_target, x0)


def fista_solve(
    inst: Instance,
    cfg: ProxConfig,
    f_target: Optional[float] = None,
    x0: Optional[np.ndarray] = None,
) -> Tuple[Solution, RunTrace]:
    """
    Accelerated proximal gradient with the standard momentum sequence
    t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2 and no restart.

    The objective sequence is not monotone. Stops at KKT violation <= tol,
    at f <= f_target when a target is given, or after max_iter iterations.

    Raises:
        ConvergenceError: If the power iteration for L does not converge
    """
    with run_context(solver=cfg.label, instance=inst.name):
        return _prox_solve(inst, cfg, True, f_target, x0)
