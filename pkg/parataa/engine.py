"""Parallel sampling driver: sliding window, convergence frontier and accelerated updates"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import anderson
from .anderson import AAConfig, HistoryBuffer, Variant, safeguard
from .errors import EarlyStopError, IncompatibleTrajectoryError, SolverConfigError
from .schedule import CoefficientTable, threshold_table
from .score import ScoreModel, default_workers
from .triangular import (TrajectoryState, fixed_point_step, frontier_step, order_k_rows,
                         refresh_eps, residuals)

LOGGER = logging.getLogger(__name__)

DEFAULT_TAU = 1e-3
DEFAULT_HISTORY = 3


class Status(Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    EARLY_STOPPED = "early-stopped"


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    t1: int
    t2: int
    sum_residual: float
    max_residual: float
    evals: int
    wallclock_ns: int
    residuals: Optional[np.ndarray] = None


EarlyStop = Callable[[Sequence[IterationRecord], TrajectoryState], bool]


@dataclass
class SolverConfig:
    k: int = 1
    m: int = DEFAULT_HISTORY
    tau: float = DEFAULT_TAU
    lam: float = anderson.DEFAULT_LAMBDA
    w: Optional[int] = None
    s_max: Optional[int] = None
    T_init: Optional[int] = None
    variant: Variant = Variant.TAA
    safeguard: bool = True
    seed: int = 0
    early_stop: Optional[EarlyStop] = None
    workers: Optional[int] = None
    keep_residuals: bool = False

    def resolved(self, T: int, d: int) -> "SolverConfig":
        """Copy with T-dependent defaults filled in, validated against (T, d)."""
        cfg = SolverConfig(**{name: getattr(self, name) for name in self.__dataclass_fields__})
        cfg.w = T if cfg.w is None else cfg.w
        cfg.s_max = T if cfg.s_max is None else cfg.s_max
        cfg.workers = default_workers() if cfg.workers is None else cfg.workers
        cfg.validate(T, d)
        return cfg

    def validate(self, T: int, d: int) -> None:
        if not 1 <= self.k <= T:
            raise SolverConfigError(f"order k must lie in 1..{T}, got {self.k}")
        if self.w is not None and not 1 <= self.w <= T:
            raise SolverConfigError(f"window w must lie in 1..{T}, got {self.w}")
        if self.T_init is not None and not 1 <= self.T_init <= T:
            raise SolverConfigError(f"T_init must lie in 1..{T}, got {self.T_init}")
        if self.s_max is not None and self.s_max < 0:
            raise SolverConfigError(f"s_max must be non-negative, got {self.s_max}")
        if self.m < 1:
            raise SolverConfigError(f"history size m must be at least 1, got {self.m}")
        if self.variant is not Variant.FP and 1 < self.m and self.m >= d:
            raise SolverConfigError(
                f"history size m={self.m} must be smaller than the data dimension d={d}")
        if self.tau < 0.0 or self.lam < 0.0:
            raise SolverConfigError("tau and lambda must be non-negative")

    @property
    def aa(self) -> AAConfig:
        return AAConfig(lam=self.lam, variant=self.variant, safeguard=self.safeguard)


@dataclass
class SolveReport:
    records: List[IterationRecord] = field(default_factory=list)
    status: Status = Status.MAX_ITERS
    prefill_evals: int = 0
    certify_evals: int = 0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def total_evals(self) -> int:
        return sum(rec.evals for rec in self.records)


def update_window(r: np.ndarray, thresholds: np.ndarray, t1: int, t2: int,
                  w: int) -> Tuple[Optional[int], Optional[int], List[int]]:
    """Move the frontier to the largest violating timestep in [t1, t2].

    Returns (t1', t2', newly frozen timesteps); t1' and t2' are None when every
    residual in the window meets its threshold. The new window [t1', t2'] holds
    w timesteps, t1' = max(0, t2' - w + 1), so one iteration never evaluates more
    than w scores.
    """
    # a non-finite residual counts as a violation
    violators = [t for t in range(t1, t2 + 1) if not r[t] <= thresholds[t]]
    if not violators:
        return None, None, list(range(t1, t2 + 1))
    t2_new = max(violators)
    return max(0, t2_new - w + 1), t2_new, list(range(t2_new + 1, t2 + 1))


def init_from_trajectory(existing: TrajectoryState, T_init: int,
                         coeffs: CoefficientTable) -> TrajectoryState:
    """Warm start from a stored trajectory; x_{T_init}..x_{T-1} stay fixed."""
    if existing.T != coeffs.T or existing.d != coeffs.d:
        raise IncompatibleTrajectoryError(
            f"trajectory is (T={existing.T}, d={existing.d}), run expects "
            f"(T={coeffs.T}, d={coeffs.d})")
    if not 0 < T_init <= coeffs.T:
        raise IncompatibleTrajectoryError(f"T_init must lie in 1..{coeffs.T}, got {T_init}")
    state = TrajectoryState(x=existing.x.copy(), xi=existing.xi.copy(),
                            eps=np.zeros_like(existing.x),
                            eps_valid=np.zeros(existing.T + 1, dtype=bool),
                            frozen=np.zeros(existing.T + 1, dtype=bool),
                            seed=existing.seed)
    state.x[-1] = state.xi[-1]
    state.frozen[T_init:] = True
    return state


def _fixed_top(state: TrajectoryState) -> int:
    # smallest j with x_j..x_T all frozen
    j = state.T
    while j > 0 and state.frozen[j - 1]:
        j -= 1
    return j


def stop_after(n: int) -> EarlyStop:
    """Stop once ``n`` iterations have been performed."""
    return lambda records, state: len(records) >= n


def stop_when_close(reference: np.ndarray, rtol: float) -> EarlyStop:
    """Stop once ||x_0 - reference|| <= rtol * ||reference||."""
    reference = np.asarray(reference, dtype=np.float64)
    bound = rtol * float(np.linalg.norm(reference))
    return lambda records, state: float(np.linalg.norm(state.x[0] - reference)) <= bound


def solve_parallel(cfg: SolverConfig, coeffs: CoefficientTable, model: ScoreModel,
                   init: TrajectoryState,
                   progress: Optional[Callable[[IterationRecord], None]] = None
                   ) -> Tuple[TrajectoryState, SolveReport]:
    """Solve the triangular system from ``init`` with the configured update rule."""
    T, d = coeffs.T, model.dim
    if init.T != T or init.d != d:
        raise IncompatibleTrajectoryError(
            f"initial state is (T={init.T}, d={init.d}), run expects (T={T}, d={d})")
    cfg = cfg.resolved(T, d)
    state = init.copy()
    state.x[T] = state.xi[T]
    state.frozen[T] = True
    t_init = cfg.T_init if cfg.T_init is not None else _fixed_top(state)
    state.frozen[t_init:] = True
    report = SolveReport()
    if t_init == 0:
        # every variable of the initial state is already frozen
        report.status = Status.CONVERGED
        return state, report

    # order-k rows read eps of frozen successors that were never evaluated
    reach = range(t_init + 1, min(t_init - 1 + cfg.k, T) + 1)
    report.prefill_evals = refresh_eps(
        state, model, [j for j in reach if not state.eps_valid[j]], cfg.workers)

    thresholds = (coeffs.thresholds if cfg.tau == coeffs.tau
                  else threshold_table(coeffs.noise_scale, cfg.tau, coeffs.d))
    aa_cfg = cfg.aa
    rule = anderson.UPDATE_RULES.get(cfg.variant)
    history = HistoryBuffer(cfg.m - 1, T, d) if rule is not None else None
    t2 = t_init - 1
    t1 = max(0, t2 - cfg.w + 1)
    LOGGER.info("solve_start | T=%d | d=%d | variant=%s | k=%d | m=%d | w=%d | t_init=%d",
                T, d, cfg.variant.value, cfg.k, cfg.m, cfg.w, t_init)

    while True:
        started = time.perf_counter_ns()
        evals = refresh_eps(state, model, range(t1 + 1, t2 + 2), cfg.workers)
        r = residuals(state, coeffs, t1, t2)
        t1_new, t2_new, newly_frozen = update_window(r, thresholds, t1, t2, cfg.w)
        state.frozen[newly_frozen] = True
        if t2_new is None:
            report.certify_evals = evals
            report.status = Status.CONVERGED
            break
        if report.iterations >= cfg.s_max:
            report.certify_evals = evals
            report.status = Status.MAX_ITERS
            break
        if cfg.early_stop is not None:
            try:
                stop = cfg.early_stop(tuple(report.records), state)
            except Exception as e:
                raise EarlyStopError(
                    f"early-stop predicate failed after {report.iterations} iterations: {e}") from e
            if stop:
                report.certify_evals = evals
                report.status = Status.EARLY_STOPPED
                break

        rows = np.arange(t1, t2_new + 1)
        frontier = t2_new if cfg.safeguard else None
        if rule is None:
            state = fixed_point_step(state, coeffs, cfg.k, t1, t2_new, cfg.workers, frontier)
        else:
            f_values = order_k_rows(state, coeffs, cfg.k, rows)
            resid = f_values - state.x[rows]
            history.record(rows, state.x[rows], resid)
            update = rule(history, aa_cfg, rows, resid, iteration=report.iterations + 1)
            if frontier is not None:
                update = safeguard(update, frontier)
                if cfg.k > 1:
                    f_values[-1] = frontier_step(state, coeffs, frontier)
            state.x[rows] = update.apply(f_values)
            state.eps_valid[rows] = False
            state.iteration += 1

        if t1_new < t1:
            if history is not None:
                history.reset_rows(np.arange(t1_new, t1))
        record = IterationRecord(
            iteration=report.iterations + 1, t1=t1, t2=t2,
            sum_residual=float(np.sum(r[t1:t2 + 1])),
            max_residual=float(np.max(r[t1:t2 + 1])),
            evals=evals, wallclock_ns=time.perf_counter_ns() - started,
            residuals=r.copy() if cfg.keep_residuals else None)
        report.records.append(record)
        LOGGER.debug("iteration | s=%d | t1=%d | t2=%d | sum_residual=%.6e | evals=%d",
                     record.iteration, t1, t2, record.sum_residual, evals)
        if progress is not None:
            progress(record)
        t1, t2 = t1_new, t2_new

    LOGGER.info("solve_end | status=%s | iterations=%d | evals=%d",
                report.status.value, report.iterations, report.total_evals)
    return state, report
