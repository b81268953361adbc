"""
Shared fixtures for the ParaTAA tests
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from parataa.schedule import (CoefficientTable, _abar_table, build_beta_schedule,
                              build_coefficients, threshold_table)
from parataa.score import GaussianMixtureModel, ScoreModel


class CountingModel(ScoreModel):
    """Delegates to another model and counts evaluations."""

    def __init__(self, inner: ScoreModel):
        super().__init__(inner.dim, inner.schedule)
        self.inner = inner
        self.calls = 0

    def eval(self, x, t):
        self.calls += 1
        return self.inner.eval(x, t)


def build_problem(T=16, d=4, K=3, eta=0.0, tau=1e-3, model_seed=0, mean_scale=2.0,
                  means=None):
    """Coefficient table and GMM model on a linear schedule."""
    sched = build_beta_schedule(T)
    coeffs = build_coefficients(sched, eta, tau, d)
    if means is None:
        rng = np.random.default_rng(model_seed)
        means = mean_scale * rng.standard_normal((K, d))
    model = GaussianMixtureModel(np.ones(len(means)), means, 1.0, sched)
    return coeffs, model


def custom_coefficients(T, d, a, b, c, tau=1e-3):
    """Coefficient table with hand-picked a, b, c (step-indexed a and b)."""
    sched = build_beta_schedule(T)
    a = np.asarray(a, dtype=np.float64)
    noise_scale = np.ones(T)
    return CoefficientTable(schedule=sched, eta=0.0, tau=tau, d=d, a=a,
                            b=np.asarray(b, dtype=np.float64),
                            c=np.asarray(c, dtype=np.float64),
                            noise_scale=noise_scale,
                            thresholds=threshold_table(noise_scale, tau, d),
                            _abar=_abar_table(a))


@pytest.fixture
def make_problem():
    return build_problem


@pytest.fixture
def problem():
    return build_problem()


@pytest.fixture
def copy_chain():
    """x_{t-1} = x_t: a = 1, b = 0, c = 0 on T=6, d=2."""
    T = 6
    return custom_coefficients(T, 2, np.ones(T + 1), np.zeros(T + 1), np.zeros(T))


@pytest.fixture
def counting():
    return CountingModel
