"""Typed run configuration produced by the config analyzer"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .anderson import Variant
from .engine import SolverConfig
from .errors import ConfigError
from .schedule import (DEFAULT_BETA_END, DEFAULT_BETA_START, BetaSchedule,
                       build_beta_schedule)
from .score import GaussianMixtureModel, GuidedModel, ScoreModel

DEFAULT_MEAN_SCALE = 3.0
NO_SAFEGUARD_SUFFIX = "-NOSG"
SWEPT_FP = "FP+"
DEFAULT_COMPARE = ("FP", "AA", "AA_PLUS", "TAA")


@dataclass
class ScheduleSpec:
    T: int
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END
    eta: float = 0.0

    def build(self) -> BetaSchedule:
        return build_beta_schedule(self.T, self.beta_start, self.beta_end)


@dataclass
class MixtureSpec:
    """Gaussian mixture given by explicit means, or by a seeded random draw."""
    weights: Optional[List[float]] = None
    means: Optional[List[List[float]]] = None
    components: Optional[int] = None
    mean_scale: float = DEFAULT_MEAN_SCALE
    model_seed: int = 0
    dim: Optional[int] = None
    s0_sq: float = 1.0

    @property
    def K(self) -> int:
        return len(self.means) if self.means is not None else self.components

    @property
    def d(self) -> int:
        return len(self.means[0]) if self.means is not None else self.dim

    def component_means(self) -> np.ndarray:
        if self.means is not None:
            return np.asarray(self.means, dtype=np.float64)
        rng = np.random.default_rng(self.model_seed)
        return self.mean_scale * rng.standard_normal((self.components, self.dim))

    def build(self, schedule: BetaSchedule) -> GaussianMixtureModel:
        weights = self.weights if self.weights is not None else np.ones(self.K)
        return GaussianMixtureModel(weights, self.component_means(), self.s0_sq, schedule)


@dataclass
class GuidanceSpec:
    conditional: MixtureSpec
    scale: float


@dataclass
class RunSpec:
    seeds: int = 1
    base_seed: int = 0
    threads: Optional[int] = None
    require_convergence: bool = False

    def seed_list(self) -> List[int]:
        return [self.base_seed + i for i in range(self.seeds)]


@dataclass
class OutputSpec:
    report_csv: Optional[Path] = None
    summary_json: Optional[Path] = None
    trajectory: Optional[Path] = None
    init_trajectory: Optional[Path] = None
    residuals_csv: Optional[Path] = None


@dataclass
class CompareSpec:
    variants: List[str] = field(default_factory=lambda: list(DEFAULT_COMPARE))
    fp_plus_k_grid: Optional[List[int]] = None


@dataclass
class SweepSpec:
    k_grid: List[int] = field(default_factory=lambda: [1])
    m_grid: List[int] = field(default_factory=lambda: [1, 2, 3, 4])
    w_grid: Optional[List[int]] = None


@dataclass
class RunConfig:
    schedule: ScheduleSpec
    model: MixtureSpec
    solver: SolverConfig
    guidance: Optional[GuidanceSpec] = None
    run: RunSpec = field(default_factory=RunSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    compare: CompareSpec = field(default_factory=CompareSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    source: str = "<config>"

    @property
    def T(self) -> int:
        return self.schedule.T

    @property
    def d(self) -> int:
        return self.model.d

    def build_model(self, schedule: BetaSchedule) -> ScoreModel:
        model = self.model.build(schedule)
        if self.guidance is None:
            return model
        conditional = self.guidance.conditional.build(schedule)
        return GuidedModel(model, conditional, self.guidance.scale)

    def default_k_grid(self) -> List[int]:
        """Powers of two below T, then T itself."""
        grid, k = [], 1
        while k < self.T:
            grid.append(k)
            k *= 2
        return grid + [self.T]


def parse_variant_label(label: str) -> Tuple[Variant, bool, bool]:
    """Split a comparison label into (variant, safeguard, swept k).

    ``FP+`` is fixed point with k picked from a grid; a ``-NOSG`` suffix turns
    the safeguard off.
    """
    name, safeguard = label, True
    if name.upper().endswith(NO_SAFEGUARD_SUFFIX):
        name, safeguard = name[:-len(NO_SAFEGUARD_SUFFIX)], False
    name = name.upper()
    if name == SWEPT_FP:
        return Variant.FP, safeguard, True
    try:
        return Variant[name], safeguard, False
    except KeyError:
        known = ", ".join([v.name for v in Variant] + [SWEPT_FP])
        raise ConfigError(f"unknown variant '{label}' (known: {known}, optional {NO_SAFEGUARD_SUFFIX})")
