"""Noise-prediction models eps(x, t) and batched evaluation"""
import os
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import ParaTAAError, ScoreEvaluationError, ShapeError
from .schedule import BetaSchedule

THREADS_ENV = "PARATAA_THREADS"


def default_workers() -> int:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        raise ParaTAAError(f"{THREADS_ENV} must be an integer, got {value!r}")


class ScoreModel(ABC):
    """Pure evaluator of the noise prediction eps(x, t) for steps t=1..T."""

    def __init__(self, dim: int, schedule: BetaSchedule):
        self.dim = dim
        self.schedule = schedule

    @abstractmethod
    def eval(self, x: np.ndarray, t: int) -> np.ndarray:
        ...


class GaussianMixtureModel(ScoreModel):
    """Closed-form eps for Gaussian-mixture data under the variance-preserving forward process.

    The marginal at step t is sum_k w_k N(sqrt(abar_t) mu_k, (abar_t s0^2 + 1 - abar_t) I),
    so eps(x, t) = sqrt(1 - abar_t) * sum_k gamma_k(x) (x - sqrt(abar_t) mu_k) / v_t.
    """

    def __init__(self, weights, means, s0_sq: float, schedule: BetaSchedule):
        weights = np.asarray(weights, dtype=np.float64)
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        if weights.ndim != 1 or weights.shape[0] != means.shape[0]:
            raise ShapeError(
                f"got {weights.shape[0]} weights for {means.shape[0]} component means")
        if np.any(weights <= 0.0):
            raise ParaTAAError("mixture weights must be positive")
        if s0_sq <= 0.0:
            raise ParaTAAError(f"component variance must be positive, got {s0_sq}")
        super().__init__(means.shape[1], schedule)
        self.weights = weights / weights.sum()
        self.means = means
        self.s0_sq = float(s0_sq)
        self._log_weights = np.log(self.weights)
        for arr in (self.weights, self.means, self._log_weights):
            arr.setflags(write=False)

    @property
    def K(self) -> int:
        return self.means.shape[0]

    def _marginal(self, t: int) -> Tuple[float, float]:
        ab = self.schedule.alpha_bar(t)
        return ab, ab * self.s0_sq + (1.0 - ab)

    def _logits(self, x: np.ndarray, t: int):
        ab, var = self._marginal(t)
        diff = x[None, :] - np.sqrt(ab) * self.means
        logits = self._log_weights - np.sum(diff * diff, axis=1) / (2.0 * var)
        return ab, var, diff, logits

    def responsibilities(self, x: np.ndarray, t: int) -> np.ndarray:
        _, _, _, logits = self._logits(x, t)
        return np.exp(logits - logsumexp(logits))

    def log_density(self, x: np.ndarray, t: int) -> float:
        _, var, _, logits = self._logits(x, t)
        return float(logsumexp(logits) - 0.5 * self.dim * np.log(2.0 * np.pi * var))

    def eval(self, x: np.ndarray, t: int) -> np.ndarray:
        ab, var, diff, logits = self._logits(x, t)
        gamma = np.exp(logits - logsumexp(logits))
        return np.sqrt(1.0 - ab) * (np.sum(gamma[:, None] * diff, axis=0) / var)


class GuidedModel(ScoreModel):
    """Classifier-free guidance: eps_u + scale * (eps_c - eps_u)."""

    def __init__(self, unconditional: ScoreModel, conditional: ScoreModel, scale: float):
        if unconditional.dim != conditional.dim:
            raise ShapeError(
                f"guidance branches disagree on dimension: {unconditional.dim} vs {conditional.dim}")
        if unconditional.schedule.T != conditional.schedule.T:
            raise ShapeError("guidance branches were built on different schedules")
        super().__init__(unconditional.dim, unconditional.schedule)
        self.unconditional = unconditional
        self.conditional = conditional
        self.scale = float(scale)

    def eval(self, x: np.ndarray, t: int) -> np.ndarray:
        return apply_guidance(self.unconditional.eval(x, t),
                              self.conditional.eval(x, t), self.scale)


def apply_guidance(eps_uncond: np.ndarray, eps_cond: np.ndarray, scale: float) -> np.ndarray:
    if np.shape(eps_uncond) != np.shape(eps_cond):
        raise ShapeError(
            f"guidance inputs differ in shape: {np.shape(eps_uncond)} vs {np.shape(eps_cond)}")
    return eps_uncond + scale * (eps_cond - eps_uncond)


def eval_eps(model: ScoreModel, x: np.ndarray, t: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ShapeError(f"expected a vector of dimension {model.dim}, got shape {x.shape}")
    if not 1 <= t <= model.schedule.T:
        raise ShapeError(f"step {t} outside 1..{model.schedule.T}")
    return model.eval(x, t)


def eval_batch(model: ScoreModel, points: Sequence[Tuple[np.ndarray, int]],
               workers: Optional[int] = None) -> List[np.ndarray]:
    """Evaluate every (x, t) point; results are positional and independent of ``workers``."""
    workers = default_workers() if workers is None else workers

    def _one(index):
        x, t = points[index]
        try:
            return eval_eps(model, x, t)
        except Exception as e:
            raise ScoreEvaluationError(str(e), index) from e

    indices = range(len(points))
    if workers <= 1 or len(points) <= 1:
        return [_one(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, indices))
