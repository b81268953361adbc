"""Anderson acceleration for triangular systems

All updates are matrix-free: only m_i x m_i systems are formed. An update is
returned as a correction C with delta = -R + C, so that x_new = x - delta = F - C.
"""
import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import RankDeficiencyError, ShapeError, SolverConfigError

LOGGER = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1e-8


class Variant(Enum):
    FP = "FP"
    AA = "AA"
    AA_PLUS = "AA_PLUS"
    TAA = "TAA"


@dataclass(frozen=True)
class AAConfig:
    lam: float = DEFAULT_LAMBDA
    variant: Variant = Variant.TAA
    safeguard: bool = True

    def __post_init__(self):
        if self.lam < 0.0:
            raise SolverConfigError(f"lambda must be non-negative, got {self.lam}")


class HistoryBuffer:
    """Ring buffers of the difference columns dX = x^{i+1} - x^i and dR = R^{i+1} - R^i.

    A column spans every timestep; rows that had no previous value when the
    column was pushed hold zeros in it.
    """

    def __init__(self, capacity: int, T: int, d: int):
        if capacity < 0:
            raise ShapeError(f"history capacity must be non-negative, got {capacity}")
        self.capacity = capacity
        self.T = T
        self.d = d
        self.dx = np.zeros((capacity, T, d))
        self.dr = np.zeros((capacity, T, d))
        self.head = 0
        self.depth = 0
        self.pushes = 0
        self.prev_x = np.zeros((T, d))
        self.prev_r = np.zeros((T, d))
        self.has_prev = np.zeros(T, dtype=bool)

    def push(self, delta_x: np.ndarray, delta_r: np.ndarray, rows) -> None:
        rows = np.asarray(rows, dtype=np.intp)
        expected = (rows.size, self.d)
        if np.shape(delta_x) != expected or np.shape(delta_r) != expected:
            raise ShapeError(
                f"history blocks must be {expected}, got {np.shape(delta_x)} and {np.shape(delta_r)}")
        self.pushes += 1
        if self.capacity == 0:
            return
        slot = self.head
        self.dx[slot] = 0.0
        self.dr[slot] = 0.0
        self.dx[slot, rows] = delta_x
        self.dr[slot, rows] = delta_r
        self.head = (self.head + 1) % self.capacity
        self.depth = min(self.depth + 1, self.capacity)

    def record(self, rows, x: np.ndarray, r: np.ndarray) -> bool:
        """Push the differences against the last recorded (x, R) of each row."""
        rows = np.asarray(rows, dtype=np.intp)
        known = self.has_prev[rows]
        pushed = bool(known.any())
        if pushed:
            mask = known[:, None]
            self.push(np.where(mask, x - self.prev_x[rows], 0.0),
                      np.where(mask, r - self.prev_r[rows], 0.0), rows)
        self.prev_x[rows] = x
        self.prev_r[rows] = r
        self.has_prev[rows] = True
        return pushed

    def reset_rows(self, rows) -> None:
        rows = np.asarray(rows, dtype=np.intp)
        self.dx[:, rows] = 0.0
        self.dr[:, rows] = 0.0
        self.has_prev[rows] = False

    def columns(self, rows):
        """(X, F) blocks of shape (len(rows), d, depth), oldest column first."""
        rows = np.asarray(rows, dtype=np.intp)
        if self.depth == 0:
            empty = np.zeros((rows.size, self.d, 0))
            return empty, empty.copy()
        order = [(self.head - self.depth + i) % self.capacity for i in range(self.depth)]
        X = self.dx[order][:, rows, :].transpose(1, 2, 0)
        F = self.dr[order][:, rows, :].transpose(1, 2, 0)
        return X, F


def push_history(buf: HistoryBuffer, delta_x: np.ndarray, delta_r: np.ndarray, rows) -> HistoryBuffer:
    buf.push(delta_x, delta_r, rows)
    return buf


@dataclass
class AndersonUpdate:
    rows: np.ndarray
    residual: np.ndarray
    correction: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return -self.residual + self.correction

    def apply(self, f_values: np.ndarray) -> np.ndarray:
        return f_values - self.correction


def _solve(gram: np.ndarray, rhs: np.ndarray, lam: float, iteration: Optional[int]) -> np.ndarray:
    scale = float(np.mean(np.diag(gram))) if gram.size else 0.0
    if scale == 0.0:
        # no secant information: the update degenerates to plain fixed point
        return np.zeros(rhs.shape)
    system = gram + (lam * scale) * np.eye(gram.shape[0])
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("error" if lam == 0.0 else "always", scipy.linalg.LinAlgWarning)
            gamma = scipy.linalg.solve(system, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as e:
        raise RankDeficiencyError(
            f"history Gram matrix of size {gram.shape[0]} is singular ({e})", iteration) from e
    if any(issubclass(w.category, scipy.linalg.LinAlgWarning) for w in caught):
        LOGGER.warning("ill_conditioned_history | iteration=%s | size=%d | lambda=%.1e",
                       iteration, gram.shape[0], lam)
    return gamma


def _prepare(buf: HistoryBuffer, rows, residual: np.ndarray):
    rows = np.asarray(rows, dtype=np.intp)
    residual = np.asarray(residual, dtype=np.float64)
    if residual.shape != (rows.size, buf.d):
        raise ShapeError(f"residual block must be {(rows.size, buf.d)}, got {residual.shape}")
    X, F = buf.columns(rows)
    return rows, residual, X, F


def _suffix_sums(blocks: np.ndarray) -> np.ndarray:
    # sums over rows t..t2 for every t, accumulated from the top row down
    return np.cumsum(blocks[::-1], axis=0)[::-1]


def aa_apply(buf: HistoryBuffer, cfg: AAConfig, rows, residual: np.ndarray,
             iteration: Optional[int] = None) -> AndersonUpdate:
    """Standard AA: one least-squares fit over the whole stacked window."""
    rows, residual, X, F = _prepare(buf, rows, residual)
    correction = np.zeros_like(residual)
    if buf.depth > 0 and rows.size:
        flat = F.reshape(-1, buf.depth)
        gamma = _solve(flat.T @ flat, flat.T @ residual.ravel(), cfg.lam, iteration)
        correction = (X + F) @ gamma
    return AndersonUpdate(rows, residual, correction)


def taa_apply(buf: HistoryBuffer, cfg: AAConfig, rows, residual: np.ndarray,
              iteration: Optional[int] = None) -> AndersonUpdate:
    """Triangular AA: the fit for row t uses only rows t..t2 of the window."""
    rows, residual, X, F = _prepare(buf, rows, residual)
    correction = np.zeros_like(residual)
    if buf.depth > 0 and rows.size:
        grams = _suffix_sums(np.einsum("ndi,ndj->nij", F, F))
        rhs = _suffix_sums(np.einsum("ndi,nd->ni", F, residual))
        for n in range(rows.size):
            gamma = _solve(grams[n], rhs[n], cfg.lam, iteration)
            correction[n] = (X[n] + F[n]) @ gamma
    return AndersonUpdate(rows, residual, correction)


def aa_plus_apply(buf: HistoryBuffer, cfg: AAConfig, rows, residual: np.ndarray,
                  iteration: Optional[int] = None) -> AndersonUpdate:
    """Block-upper part of the standard AA matrix: global Gram, suffix right-hand side."""
    rows, residual, X, F = _prepare(buf, rows, residual)
    correction = np.zeros_like(residual)
    if buf.depth > 0 and rows.size:
        flat = F.reshape(-1, buf.depth)
        rhs = _suffix_sums(np.einsum("ndi,nd->ni", F, residual))
        gammas = _solve(flat.T @ flat, rhs.T, cfg.lam, iteration)
        correction = np.einsum("ndi,in->nd", X + F, gammas)
    return AndersonUpdate(rows, residual, correction)


def safeguard(update: AndersonUpdate, frontier: int) -> AndersonUpdate:
    """Force a pure fixed-point step (delta = -R) on the frontier row.

    For order k > 1 the driver also swaps that row's F^{(k)} for F^{(1)}, so the
    frontier is rebuilt from its frozen successor alone.
    """
    hit = np.flatnonzero(update.rows == frontier)
    if hit.size == 0:
        return update
    correction = update.correction.copy()
    correction[hit] = 0.0
    return AndersonUpdate(update.rows, update.residual, correction)


UPDATE_RULES = {
    Variant.AA: aa_apply,
    Variant.AA_PLUS: aa_plus_apply,
    Variant.TAA: taa_apply,
}
