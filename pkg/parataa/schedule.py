"""Noise schedules and first-order sampler coefficients"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ScheduleError

LOGGER = logging.getLogger(__name__)

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class BetaSchedule:
    """Linear beta schedule, 1-based steps t=1..T with alpha_bar(0) = 1."""
    T: int
    betas: np.ndarray
    alpha_bars: np.ndarray

    def alpha_bar(self, t: int) -> float:
        if t == 0:
            return 1.0
        return float(self.alpha_bars[t - 1])


@dataclass(frozen=True)
class CoefficientTable:
    """Per-step coefficients of x_{t-1} = a_t x_t + b_t eps(x_t, t) + c_{t-1} xi_{t-1}.

    ``a`` and ``b`` are indexed by step (entry 0 is unused), ``c``,
    ``noise_scale`` and ``thresholds`` by variable index 0..T-1.
    """
    schedule: BetaSchedule
    eta: float
    tau: float
    d: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    noise_scale: np.ndarray
    thresholds: np.ndarray
    clamped: bool = False
    _abar: np.ndarray = field(default=None, repr=False)

    @property
    def T(self) -> int:
        return self.schedule.T

    def abar(self, i: int, s: int) -> float:
        return abar(self, i, s)


def build_beta_schedule(T: int, beta_start: float = DEFAULT_BETA_START,
                        beta_end: float = DEFAULT_BETA_END) -> BetaSchedule:
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ScheduleError(f"T must be a positive integer, got {T!r}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    betas = np.linspace(beta_start, beta_end, int(T), dtype=np.float64)
    # cumprod is a left-to-right running product: abar_t == abar_{t-1} * (1 - beta_t)
    alpha_bars = np.cumprod(1.0 - betas)
    betas.setflags(write=False)
    alpha_bars.setflags(write=False)
    return BetaSchedule(T=int(T), betas=betas, alpha_bars=alpha_bars)


def _sigma(ab_prev: float, ab: float, eta: float) -> float:
    return eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab)) * np.sqrt(1.0 - ab / ab_prev)


def _abar_table(a: np.ndarray) -> np.ndarray:
    # table[i, s] = a_i * ... * a_s, 1 for s < i; built by sequential products
    T = a.shape[0] - 1
    table = np.ones((T + 1, T + 1), dtype=np.float64)
    for s in range(1, T + 1):
        table[1:s + 1, s] = table[1:s + 1, s - 1] * a[s]
    table.setflags(write=False)
    return table


def threshold_table(noise_scale: np.ndarray, tau: float, d: int) -> np.ndarray:
    """Stopping thresholds tau^2 * g_t^2 * d with g_t the discrete noise scale."""
    # sigma_1 is zero for every schedule; a zero scale borrows the smallest positive one
    positive = noise_scale[noise_scale > 0.0]
    floor = positive.min() if positive.size else 0.0
    scale = np.where(noise_scale > 0.0, noise_scale, floor)
    return (tau * tau) * (scale * scale) * d


def build_coefficients(sched: BetaSchedule, eta: float, tau: float, d: int) -> CoefficientTable:
    """Build the eta-family (DDIM eta=0 .. DDPM eta=1) coefficient table."""
    if not 0.0 <= eta <= 1.0:
        raise ScheduleError(f"eta must lie in [0, 1], got {eta}")
    if tau < 0.0:
        raise ScheduleError(f"tau must be non-negative, got {tau}")
    if d < 1:
        raise ScheduleError(f"data dimension must be positive, got {d}")

    T = sched.T
    a = np.ones(T + 1, dtype=np.float64)
    b = np.zeros(T + 1, dtype=np.float64)
    c = np.zeros(T, dtype=np.float64)
    noise_scale = np.zeros(T, dtype=np.float64)
    clamped = False
    for t in range(1, T + 1):
        ab_prev, ab = sched.alpha_bar(t - 1), sched.alpha_bar(t)
        sigma = _sigma(ab_prev, ab, eta)
        a[t] = np.sqrt(ab_prev / ab)
        direction = 1.0 - ab_prev - sigma * sigma
        if direction < 0.0:
            LOGGER.warning("coefficient_clamped | step=%d | value=%.3e", t, direction)
            direction = 0.0
            clamped = True
        b[t] = np.sqrt(direction) - np.sqrt(ab_prev * (1.0 - ab) / ab)
        c[t - 1] = sigma
        noise_scale[t - 1] = _sigma(ab_prev, ab, 1.0)

    thresholds = threshold_table(noise_scale, tau, d)
    for arr in (a, b, c, noise_scale, thresholds):
        arr.setflags(write=False)
    return CoefficientTable(schedule=sched, eta=float(eta), tau=float(tau), d=int(d),
                            a=a, b=b, c=c, noise_scale=noise_scale,
                            thresholds=thresholds, clamped=clamped,
                            _abar=_abar_table(a))


def abar(coeffs: CoefficientTable, i: int, s: int) -> float:
    """Product a_i * ... * a_s, with the empty product 1 for s < i."""
    T = coeffs.T
    if not 1 <= i <= T or not 0 <= s <= T:
        raise IndexError(f"abar index out of range: i={i}, s={s}, T={T}")
    return float(coeffs._abar[i, s])
