"""Triangular nonlinear equations of autoregressive sampling

Variables x_0..x_T, with x_T = xi_T fixed. Equation t (t=1..T) defines x_{t-1};
the k-th order form expresses x_{t-1} through x_t..x_{t_k}, t_k = min(t+k-1, T).
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InternalStateError, ShapeError
from .schedule import CoefficientTable
from .score import ScoreModel, eval_batch, eval_eps


@dataclass
class TrajectoryState:
    x: np.ndarray          # (T+1, d), row t holds x_t
    xi: np.ndarray         # (T+1, d) noise bank, never redrawn
    eps: np.ndarray        # (T+1, d), row j caches eps(x_j, j); row 0 unused
    eps_valid: np.ndarray  # (T+1,) bool
    frozen: np.ndarray     # (T+1,) bool, frozen[T] is always set
    iteration: int = 0
    seed: Optional[int] = None

    @property
    def T(self) -> int:
        return self.x.shape[0] - 1

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def copy(self) -> "TrajectoryState":
        return TrajectoryState(self.x.copy(), self.xi.copy(), self.eps.copy(),
                               self.eps_valid.copy(), self.frozen.copy(),
                               self.iteration, self.seed)


def _streams(seed: int):
    noise_seq, init_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(noise_seq), np.random.default_rng(init_seq)


def noise_bank(T: int, d: int, seed: int) -> np.ndarray:
    """xi_0..xi_T drawn once from the run seed."""
    noise_rng, _ = _streams(seed)
    return noise_rng.standard_normal((T + 1, d))


def state_from(x: np.ndarray, xi: np.ndarray, seed: Optional[int] = None) -> TrajectoryState:
    x = np.array(x, dtype=np.float64)
    xi = np.array(xi, dtype=np.float64)
    if x.shape != xi.shape or x.ndim != 2:
        raise ShapeError(f"trajectory {x.shape} and noise bank {xi.shape} must both be (T+1, d)")
    x[-1] = xi[-1]
    frozen = np.zeros(x.shape[0], dtype=bool)
    frozen[-1] = True
    return TrajectoryState(x=x, xi=xi, eps=np.zeros_like(x),
                           eps_valid=np.zeros(x.shape[0], dtype=bool),
                           frozen=frozen, seed=seed)


def initial_state(T: int, d: int, seed: int) -> TrajectoryState:
    """Standard-normal initialisation of x_0..x_{T-1}, x_T = xi_T."""
    noise_rng, init_rng = _streams(seed)
    xi = noise_rng.standard_normal((T + 1, d))
    x = init_rng.standard_normal((T + 1, d))
    return state_from(x, xi, seed)


def sequential_solve(coeffs: CoefficientTable, model: ScoreModel, xi: np.ndarray,
                     seed: Optional[int] = None) -> TrajectoryState:
    """The autoregressive sampler; exactly T score evaluations."""
    T = coeffs.T
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (T + 1, model.dim):
        raise ShapeError(f"noise bank must be ({T + 1}, {model.dim}), got {xi.shape}")
    state = state_from(np.zeros_like(xi), xi, seed)
    x, eps = state.x, state.eps
    for t in range(T, 0, -1):
        eps[t] = eval_eps(model, x[t], t)
        x[t - 1] = coeffs.a[t] * x[t] + coeffs.b[t] * eps[t] + coeffs.c[t - 1] * xi[t - 1]
    state.eps_valid[1:] = True
    state.frozen[:] = True
    return state


def refresh_eps(state: TrajectoryState, model: ScoreModel, steps: Sequence[int],
                workers: Optional[int] = None) -> int:
    """One batched evaluation of eps at the given steps; returns the evaluation count."""
    steps = list(steps)
    values = eval_batch(model, [(state.x[j], j) for j in steps], workers)
    for j, value in zip(steps, values):
        state.eps[j] = value
        state.eps_valid[j] = True
    return len(steps)


def order_k_rows(state: TrajectoryState, coeffs: CoefficientTable, k: int,
                 rows: np.ndarray) -> np.ndarray:
    """F^{(k)} for the variables in ``rows`` (variable v uses equation t = v + 1).

    Terms are accumulated in ascending j for every row, so a row's value does
    not depend on which other rows share the call.
    """
    T = coeffs.T
    rows = np.asarray(rows, dtype=np.intp)
    if not 1 <= k <= T:
        raise ShapeError(f"order k must lie in 1..{T}, got {k}")
    t = rows + 1
    tk = np.minimum(t + k - 1, T)
    needed = np.zeros(T + 1, dtype=bool)
    for lo, hi in zip(t, tk):
        needed[lo:hi + 1] = True
    missing = np.flatnonzero(needed & ~state.eps_valid)
    if missing.size:
        raise InternalStateError(f"eps cache missing for steps {missing.tolist()}")

    table = coeffs._abar
    acc = table[t, tk][:, None] * state.x[tk]
    for q in range(k):
        j = t + q
        live = j <= tk
        if not live.any():
            break
        jl = j[live]
        coef = table[t[live], jl - 1] * coeffs.b[jl]
        acc[live] = acc[live] + coef[:, None] * state.eps[jl]
    for q in range(k):
        j = t + q
        live = j <= tk
        if not live.any():
            break
        jl = j[live]
        coef = table[t[live], jl - 1] * coeffs.c[jl - 1]
        acc[live] = acc[live] + coef[:, None] * state.xi[jl - 1]
    return acc


def f_order_k(t: int, state: TrajectoryState, coeffs: CoefficientTable, k: int) -> np.ndarray:
    """F^{(k)}_{t-1}, the right-hand side of the t-th k-th order equation."""
    if not 1 <= t <= coeffs.T:
        raise ShapeError(f"equation index {t} outside 1..{coeffs.T}")
    return order_k_rows(state, coeffs, k, np.array([t - 1]))[0]


def frontier_step(state: TrajectoryState, coeffs: CoefficientTable, v: int) -> np.ndarray:
    """F^{(1)}_v: variable v rebuilt from x_{v+1} alone."""
    return order_k_rows(state, coeffs, 1, np.array([v]))[0]


def residuals(state: TrajectoryState, coeffs: CoefficientTable,
              t1: int = 0, t2: Optional[int] = None) -> np.ndarray:
    """Squared first-order residuals r_0..r_{T-1}; entries outside [t1, t2] are 0."""
    T = coeffs.T
    t2 = T - 1 if t2 is None else t2
    r = np.zeros(T, dtype=np.float64)
    if t2 < t1:
        return r
    rows = np.arange(t1, t2 + 1)
    diff = state.x[rows] - order_k_rows(state, coeffs, 1, rows)
    r[rows] = np.sum(diff * diff, axis=1)
    return r


def _chunks(rows: np.ndarray, workers: int):
    return [chunk for chunk in np.array_split(rows, workers) if chunk.size]


def fixed_point_step(state: TrajectoryState, coeffs: CoefficientTable, k: int,
                     t1: int, t2: int, workers: int = 1,
                     frontier: Optional[int] = None) -> TrajectoryState:
    """Jacobi update x_t <- F^{(k)}_t(old x) for unfrozen t in [t1, t2].

    The ``frontier`` row, whose successors are all frozen, takes the first-order
    update instead, so its residual is zero at the next evaluation.
    """
    rows = np.arange(t1, t2 + 1)
    rows = rows[~state.frozen[rows]]
    new = state.copy()
    new.iteration = state.iteration + 1
    if rows.size == 0:
        return new
    if workers <= 1:
        new.x[rows] = order_k_rows(state, coeffs, k, rows)
    else:
        chunks = _chunks(rows, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ch: order_k_rows(state, coeffs, k, ch), chunks))
        for chunk, part in zip(chunks, parts):
            new.x[chunk] = part
    if frontier is not None and k > 1 and frontier in rows:
        new.x[frontier] = frontier_step(state, coeffs, frontier)
    changed = rows[np.any(new.x[rows] != state.x[rows], axis=1)]
    new.eps_valid[changed] = False
    return new


def verify_equivalence(trajectory: TrajectoryState, coeffs: CoefficientTable, k: int) -> float:
    """max_t ||x_{t-1} - F^{(k)}_{t-1}(x)||; zero certifies the order-k system is solved."""
    rows = np.arange(coeffs.T)
    diff = trajectory.x[rows] - order_k_rows(trajectory, coeffs, k, rows)
    return float(np.max(np.sqrt(np.sum(diff * diff, axis=1))))


def picard_step(state: TrajectoryState, coeffs: CoefficientTable) -> TrajectoryState:
    """Whole-trajectory refinement: every x_{t-1} is rebuilt from x_T by summing all increments.

    Equivalent to ``fixed_point_step`` with k = T, written as a running sum from the
    top, the way Picard-Lindelof iteration integrates the drift of the old iterate.
    """
    T = coeffs.T
    new = state.copy()
    new.iteration = state.iteration + 1
    for v in range(T):
        t = v + 1
        acc = coeffs._abar[t, T] * state.x[T]
        for j in range(t, T + 1):
            acc = acc + (coeffs._abar[t, j - 1] * coeffs.b[j]) * state.eps[j]
        for j in range(t, T + 1):
            acc = acc + (coeffs._abar[t, j - 1] * coeffs.c[j - 1]) * state.xi[j - 1]
        new.x[v] = acc
    new.eps_valid[:T] = False
    return new
