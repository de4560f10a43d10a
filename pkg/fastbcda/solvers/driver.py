"""
Active-set block coordinate descent outer loop.

One outer iteration at x^k:

1. estimate A^k / N^k (fixed epsilon, or the epsilon line search);
2. order N^k by decreasing violation, keep the first s indices and cut them
   into blocks of size r;
3. zero x on A^k;
4. solve every block subproblem exactly at the running point and splice
   the block solution in.

The run optionally switches to a reduced smooth solve on N^k once the
non-active cardinality has settled (enhanced stage).
"""

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from fastbcda.core.errors import (
    DimensionError,
    FastBCDAError,
    InvalidParameterError,
)
from fastbcda.core.logging_config import get_logger, run_context
from fastbcda.schemas.common import SolveStatus
from fastbcda.schemas.solver import Measure, SolverConfig, Strategy
from fastbcda.schemas.trace import TraceRecord
from fastbcda.solvers.activeset import (
    EstimateResult,
    epsilon_linesearch,
    estimate,
    estimate_comparison,
    set_active_to_zero,
    yuan_violation_scalar,
)
from fastbcda.solvers.blocksolve import (
    BlockSubproblem,
    kkt_max_violation,
    phi,
    solve_block,
    violation_first_order,
)
from fastbcda.solvers.problem import (
    Instance,
    SolverState,
    apply_block_delta,
    hessian_block,
    initial_state,
)
from fastbcda.solvers.trace import RunTrace, Solution

logger = get_logger(__name__)


@dataclass(frozen=True)
class BlockPlan:
    """Ordered non-active indices, the selected prefix and its blocks."""
    ordered: np.ndarray
    selected: np.ndarray
    blocks: List[np.ndarray] = field(default_factory=list)

    @property
    def q(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class ReducedSolveResult:
    """Outcome of the reduced smooth solve; x is zero off the support."""
    x: np.ndarray
    converged: bool
    iterations: int


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def resolve_block_count(
    inst: Instance, cfg: SolverConfig, n_nonactive: int
) -> int:
    """Number s of non-active indices processed per outer iteration."""
    if cfg.s_absolute is not None:
        s = cfg.s_absolute
    elif cfg.s_from_truth and inst.x_true is not None:
        s = _round_half_up(
            cfg.s_fraction * int(np.count_nonzero(inst.x_true))
        )
    else:
        s = _round_half_up(cfg.s_fraction * n_nonactive)
    return max(cfg.block_size, s)


def ordering_measure(
    inst: Instance,
    x: np.ndarray,
    g: np.ndarray,
    measure: Measure,
    idx: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Violation magnitude used to rank coordinates (restricted to idx)."""
    if idx is not None:
        x, g = x[idx], g[idx]
    if measure is Measure.first_order:
        return violation_first_order(x, g, inst.tau)
    H = inst.col_norms_sq if idx is None else inst.col_norms_sq[idx]
    return np.abs(phi(x, g, H, inst.tau))


def build_block_plan(
    inst: Instance,
    state: SolverState,
    nonactive: np.ndarray,
    cfg: SolverConfig,
    g: Optional[np.ndarray] = None,
) -> BlockPlan:
    """
    Sort N^k by decreasing violation (ties by index), keep min(s, |N^k|)
    indices and partition them in order into blocks of size r; the last
    block is shorter when the count is not a multiple of r.
    """
    nonactive = np.asarray(nonactive, dtype=np.intp)
    if nonactive.size == 0:
        empty = np.empty(0, dtype=np.intp)
        return BlockPlan(ordered=empty, selected=empty, blocks=[])
    if g is None:
        g = state.gradient

    values = ordering_measure(inst, state.x, g, cfg.measure, idx=nonactive)
    ordered = nonactive[np.lexsort((nonactive, -values))]
    s = resolve_block_count(inst, cfg, nonactive.size)
    selected = ordered[: min(s, ordered.size)]
    r = cfg.block_size
    blocks = [selected[i : i + r] for i in range(0, selected.size, r)]
    return BlockPlan(ordered=ordered, selected=selected, blocks=blocks)


def _estimate_step(
    inst: Instance,
    state: SolverState,
    cfg: SolverConfig,
    yuan_m: Optional[float],
) -> Tuple[EstimateResult, SolverState]:
    """Estimate at x^k and return it with the zeroed point y^{0,k}."""
    params = cfg.estimate_params
    g = state.gradient
    if cfg.adaptive_eps:
        return epsilon_linesearch(inst, state, params, g=g)

    if params.strategy is Strategy.ours:
        est = estimate(inst, state.x, g, params)
    else:
        aux = yuan_m if params.strategy is Strategy.yuan else params.epsilon
        if aux is None:
            aux = yuan_violation_scalar(inst)
        est = estimate_comparison(inst, state.x, g, params.strategy, aux)
    return est, set_active_to_zero(inst, state, est.active)


def _outer_iteration(
    inst: Instance,
    state: SolverState,
    cfg: SolverConfig,
    started_at: Optional[float] = None,
    yuan_m: Optional[float] = None,
) -> Tuple[SolverState, TraceRecord, EstimateResult]:
    t_start = time.perf_counter()
    g_k = state.gradient
    est, y = _estimate_step(inst, state, cfg, yuan_m)
    # Zeroing only touched A^k, so x on N^k still holds x^k for the ordering
    plan = build_block_plan(inst, state, est.nonactive, cfg, g=g_k)
    state = y

    A = inst.A
    tau = inst.tau
    for J in plan.blocks:
        y_J = state.x[J]
        sub = BlockSubproblem(
            J=J,
            g_J=A[:, J].T @ state.residual,
            H_JJ=hessian_block(inst, J),
            y_J=y_J,
            tau=tau,
        )
        apply_block_delta(state, J, solve_block(sub) - y_J)

    state.outer_iter += 1
    kkt = kkt_max_violation(inst, state.x, state.gradient)
    now = time.perf_counter()
    record = TraceRecord(
        iter=state.outer_iter,
        f=state.f,
        elapsed_s=now - (started_at if started_at is not None else t_start),
        n_nonactive=int(est.nonactive.size),
        n_active=int(est.active.size),
        kkt_violation=kkt,
        epsilon=est.epsilon_used,
        rel_error=_relative_error(inst, state.x) if cfg.track_error else None,
    )
    logger.debug(
        f"outer iteration {state.outer_iter} f={record.f:.6e} kkt={kkt:.3e}",
        extra={
            "iter": state.outer_iter,
            "f": record.f,
            "kkt": kkt,
            "n_nonactive": record.n_nonactive,
            "blocks": plan.q,
        },
    )
    return state, record, est


def outer_iteration(
    inst: Instance,
    state: SolverState,
    cfg: SolverConfig,
    started_at: Optional[float] = None,
) -> Tuple[SolverState, TraceRecord]:
    """
    Perform one outer iteration from x^k and return x^{k+1} with its record.

    The record carries f, the KKT violation at x^{k+1}, and |N^k|, |A^k| and
    epsilon of the estimate that produced it. The input state may be updated
    in place; always continue from the returned one.

    Raises:
        AssumptionViolationError: If a 2D block Hessian is not positive
            definite
    """
    state, record, _ = _outer_iteration(inst, state, cfg, started_at)
    return state, record


def enhanced_trigger(trace: RunTrace, n: int, xi_fraction: float) -> bool:
    """
    True when |N| took the same value on the last three iterations and that
    value is at most xi_fraction * n.
    """
    counts = trace.nonactive_counts
    if len(counts) < 3:
        return False
    last = counts[-3:]
    return last[0] == last[1] == last[2] and last[2] <= xi_fraction * n


def solve_reduced_smooth(
    inst: Instance,
    nonactive: np.ndarray,
    signs: np.ndarray,
    cg_tol: float,
    cg_max_iter: int,
    x0: Optional[np.ndarray] = None,
) -> ReducedSolveResult:
    """
    Minimize 1/2 ||A_N x_N - b||^2 + tau signs^T x_N with x = 0 off N.

    Solves (A_N^T A_N) x_N = A_N^T b - tau signs by conjugate gradients to
    relative residual cg_tol. Hitting cg_max_iter returns the last iterate
    with ``converged=False``.
    """
    N = np.asarray(nonactive, dtype=np.intp)
    signs = np.asarray(signs, dtype=np.float64)
    if signs.shape != N.shape:
        raise DimensionError(
            f"signs {signs.shape} do not match non-active set {N.shape}"
        )
    if np.any(signs == 0):
        raise InvalidParameterError("signs must be nonzero on the support")

    x = np.zeros(inst.n)
    if N.size == 0:
        return ReducedSolveResult(x=x, converged=True, iterations=0)

    A_N = inst.A[:, N]
    k = N.size
    normal = LinearOperator(
        (k, k), matvec=lambda v: A_N.T @ (A_N @ v), dtype=np.float64
    )
    rhs = A_N.T @ inst.b - inst.tau * signs
    iterations = 0

    def count(_: np.ndarray) -> None:
        nonlocal iterations
        iterations += 1

    x_N, info = cg(
        normal,
        rhs,
        x0=x0,
        rtol=cg_tol,
        atol=0.0,
        maxiter=cg_max_iter,
        callback=count,
    )
    converged = info == 0
    if not converged:
        logger.warning(
            f"Reduced CG solve stopped after {iterations} iterations",
            extra={"size": k, "info": int(info), "cg_tol": cg_tol},
        )
    x[N] = x_N
    return ReducedSolveResult(x=x, converged=converged, iterations=iterations)


def _relative_error(inst: Instance, x: np.ndarray) -> Optional[float]:
    if inst.x_true is None:
        return None
    scale = float(np.linalg.norm(inst.x_true))
    if scale == 0.0:
        return None
    return float(np.linalg.norm(x - inst.x_true)) / scale


def _try_enhanced_stage(
    inst: Instance,
    state: SolverState,
    nonactive: np.ndarray,
    cfg: SolverConfig,
) -> Optional[Tuple[SolverState, bool]]:
    """
    Run the reduced smooth solve on the nonzero part of N and return the new
    state when it keeps the signs and lowers f.
    """
    support = nonactive[state.x[nonactive] != 0.0]
    if support.size == 0:
        return None
    signs = np.sign(state.x[support])
    result = solve_reduced_smooth(
        inst,
        support,
        signs,
        cfg.cg_tol,
        cfg.cg_max_iter,
        x0=state.x[support],
    )
    candidate = initial_state(inst, result.x)
    candidate.outer_iter = state.outer_iter
    sign_ok = bool(np.all(np.sign(result.x[support]) == signs))
    if sign_ok and candidate.f < state.f:
        logger.info(
            f"Enhanced stage accepted on |N|={support.size}",
            extra={
                "support": int(support.size),
                "f_before": state.f,
                "f_after": candidate.f,
                "cg_iterations": result.iterations,
            },
        )
        return candidate, not result.converged

    logger.info(
        "Enhanced stage rejected; continuing block descent",
        extra={
            "support": int(support.size),
            "sign_consistent": sign_ok,
            "f_before": state.f,
            "f_after": candidate.f,
        },
    )
    return None


def _run(
    inst: Instance,
    cfg: SolverConfig,
    f_target: Optional[float] = None,
    x0: Optional[np.ndarray] = None,
) -> Tuple[Solution, RunTrace]:
    trace = RunTrace(solver=cfg.label)
    started_at = time.perf_counter()
    state = initial_state(inst, x0)
    track = cfg.track_error
    degraded = False

    kkt = kkt_max_violation(inst, state.x, state.gradient)
    trace.append(
        TraceRecord(
            iter=0,
            f=state.f,
            elapsed_s=time.perf_counter() - started_at,
            kkt_violation=kkt,
            rel_error=_relative_error(inst, state.x) if track else None,
        )
    )

    status: Optional[SolveStatus] = None
    if f_target is not None and state.f <= f_target:
        status = SolveStatus.target_reached
    elif f_target is None and kkt <= cfg.tol:
        status = SolveStatus.optimal

    last_enhanced_card: Optional[int] = None
    prev_x: Optional[np.ndarray] = None
    prev_g: Optional[np.ndarray] = None

    try:
        while status is None:
            if state.outer_iter >= cfg.max_outer:
                status = SolveStatus.max_iter
                break

            yuan_m = None
            if cfg.estimate_params.strategy is Strategy.yuan:
                yuan_m = yuan_violation_scalar(inst, prev_x, prev_g)
                prev_x, prev_g = state.x.copy(), state.gradient
            x_before = state.x.copy()

            state, record, est = _outer_iteration(
                inst, state, cfg, started_at, yuan_m
            )
            trace.append(record)
            kkt = record.kkt_violation

            if f_target is not None and state.f <= f_target:
                status = SolveStatus.target_reached
                break
            if f_target is None and kkt <= cfg.tol:
                status = SolveStatus.optimal
                break
            if np.array_equal(state.x, x_before):
                # Iterations are deterministic: an unchanged x repeats forever
                if f_target is not None:
                    status = SolveStatus.max_iter
                else:
                    logger.warning(
                        f"Iterate unchanged at iteration {state.outer_iter} "
                        f"with kkt={kkt:.3e} above tol",
                        extra={"iter": state.outer_iter, "kkt": kkt},
                    )
                    status = SolveStatus.stalled
                break

            if cfg.resync_every and state.outer_iter % cfg.resync_every == 0:
                state.resync()

            card = record.n_nonactive
            if (
                cfg.enhanced
                and card != last_enhanced_card
                and enhanced_trigger(trace, inst.n, cfg.xi_fraction)
            ):
                last_enhanced_card = card
                accepted = _try_enhanced_stage(inst, state, est.nonactive, cfg)
                if accepted is not None:
                    state, cg_degraded = accepted
                    degraded = degraded or cg_degraded
                    state.outer_iter += 1
                    kkt = kkt_max_violation(inst, state.x, state.gradient)
                    trace.append(
                        TraceRecord(
                            iter=state.outer_iter,
                            f=state.f,
                            elapsed_s=time.perf_counter() - started_at,
                            kkt_violation=kkt,
                            enhanced=True,
                            rel_error=_relative_error(inst, state.x)
                            if track
                            else None,
                        )
                    )
                    if f_target is not None and state.f <= f_target:
                        status = SolveStatus.target_reached
                    elif f_target is None and kkt <= cfg.tol:
                        status = SolveStatus.optimal
    except FastBCDAError as e:
        logger.error(
            f"Solve failed at iteration {state.outer_iter}: {e}",
            extra={"iter": state.outer_iter, "code": e.code},
        )
        e.trace = trace  # type: ignore[attr-defined]
        raise

    trace.solution = Solution(
        x=state.x.copy(),
        f=state.f,
        status=status,
        iterations=state.outer_iter,
        kkt_violation=kkt,
        elapsed_s=time.perf_counter() - started_at,
        degraded=degraded,
    )
    return trace.solution, trace


def solve(
    inst: Instance, cfg: SolverConfig, x0: Optional[np.ndarray] = None
) -> Tuple[Solution, RunTrace]:
    """
    Iterate from x0 (default 0) until the KKT violation is at most cfg.tol
    or cfg.max_outer outer iterations have run.

    Raises:
        FastBCDAError: Propagated with the partial trace attached as
            ``exc.trace``
    """
    with run_context(solver=cfg.label, instance=inst.name):
        logger.info(
            f"Starting {cfg.label} on {inst.name}",
            extra={"n": inst.n, "m": inst.m, "tau": inst.tau},
        )
        solution, trace = _run(inst, cfg, x0=x0)
        logger.info(
            f"{cfg.label} finished: {solution.status.value} after "
            f"{solution.iterations} iterations",
            extra={
                "status": solution.status.value,
                "f": solution.f,
                "kkt": solution.kkt_violation,
                "elapsed_s": solution.elapsed_s,
            },
        )
    return solution, trace


def solve_to_target(
    inst: Instance,
    cfg: SolverConfig,
    f_target: float,
    x0: Optional[np.ndarray] = None,
) -> Tuple[Solution, RunTrace]:
    """
    Iterate until f(x^k) <= f_target (status TargetReached); running out of
    outer iterations first is a failure (status MaxIter).
    """
    if not math.isfinite(f_target):
        raise InvalidParameterError(f"f_target must be finite, got {f_target}")
    with run_context(solver=cfg.label, instance=inst.name):
        solution, trace = _run(inst, cfg, f_target=f_target, x0=x0)
        logger.info(
            f"{cfg.label} to target {f_target:.10e}: {solution.status.value}",
            extra={
                "status": solution.status.value,
                "iterations": solution.iterations,
                "elapsed_s": solution.elapsed_s,
            },
        )
    return solution, trace
