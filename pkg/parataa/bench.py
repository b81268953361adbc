"""Experiment harness: paired runs against the sequential sampler and CSV/JSON reports"""
import csv
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .anderson import Variant
from .engine import SolveReport, SolverConfig, Status, init_from_trajectory, solve_parallel
from .errors import ParaTAAError
from .runconfig import RunConfig, parse_variant_label
from .schedule import build_coefficients
from .score import default_workers
from .trajectory_io import load_trajectory, save_trajectory
from .triangular import TrajectoryState, initial_state, sequential_solve

LOGGER = logging.getLogger(__name__)

REPORT_FIELDS = ["seed", "iteration", "t1", "t2", "sum_residual", "max_residual",
                 "evals", "wallclock_ms"]
RESIDUAL_FIELDS = ["seed", "iteration", "timestep", "residual", "threshold"]
COMPARE_FIELDS = ["variant", "seed", "k", "m", "status", "iterations", "evals",
                  "distance_to_oracle"]
SWEEP_FIELDS = ["k", "m", "mean_iterations", "mean_evals", "converged_fraction"]
WINDOW_FIELDS = ["w", "mean_iterations", "mean_evals", "converged_fraction"]


@dataclass
class RunResult:
    label: str
    seed: int
    cfg: SolverConfig
    state: TrajectoryState
    report: SolveReport
    distance: float

    @property
    def converged(self) -> bool:
        return self.report.status is Status.CONVERGED


def relative_distance(x: np.ndarray, reference: np.ndarray) -> float:
    norm = float(np.linalg.norm(reference))
    gap = float(np.linalg.norm(x - reference))
    return gap / norm if norm > 0.0 else gap


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(rows: Iterable[Dict], fields: Sequence[str], out=None) -> None:
    """Write dict rows to a path, an open stream, or stdout."""
    if out is None or hasattr(out, "write"):
        _write_rows(out or sys.stdout, rows, fields)
        return
    with open(out, "w", newline="", encoding="utf-8") as f:
        _write_rows(f, rows, fields)


def _write_rows(stream, rows, fields):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([format_value(row[name]) for name in fields])


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


class Bench:
    """Runs the experiments a RunConfig describes; one instance per config."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.schedule = config.schedule.build()
        self.coeffs = build_coefficients(self.schedule, config.schedule.eta,
                                         config.solver.tau, config.d)
        self.model = config.build_model(self.schedule)
        self.workers = config.solver.workers or default_workers()
        self.results: List[RunResult] = []
        self._warm: Optional[TrajectoryState] = None
        self._oracles: Dict[int, TrajectoryState] = {}

    @property
    def all_converged(self) -> bool:
        return all(result.converged for result in self.results)

    def execute(self, command: str, **options):
        method = f"cmd_{command}"
        return getattr(self, method, self.cmd_generic)(**options)

    def cmd_generic(self, **options):
        raise ParaTAAError(f"unknown command for this config: {options}")

    # ============== RUNS ==============

    def initial(self, seed: int) -> TrajectoryState:
        path = self.config.output.init_trajectory
        if path is None:
            return initial_state(self.config.T, self.config.d, seed)
        if self._warm is None:
            self._warm = load_trajectory(path, self.coeffs)
            LOGGER.info("warm_start | path=%s | T_init=%s", path, self.config.solver.T_init)
        t_init = self.config.solver.T_init
        if t_init is None:
            t_init = self.config.T
        return init_from_trajectory(self._warm, t_init, self.coeffs)

    def oracle(self, seed: int, init: TrajectoryState) -> TrajectoryState:
        if seed not in self._oracles:
            self._oracles[seed] = sequential_solve(self.coeffs, self.model, init.xi, seed)
        return self._oracles[seed]

    def solve(self, seed: int, label: Optional[str] = None, **overrides) -> RunResult:
        """One parallel solve paired with the sequential sampler on the same noise bank."""
        cfg = replace(self.config.solver, seed=seed, workers=self.workers, **overrides)
        init = self.initial(seed)
        reference = self.oracle(seed, init)
        state, report = solve_parallel(cfg, self.coeffs, self.model, init)
        result = RunResult(label=label or cfg.variant.value, seed=seed, cfg=cfg,
                           state=state, report=report,
                           distance=relative_distance(state.x[0], reference.x[0]))
        self.results.append(result)
        LOGGER.info("run_done | variant=%s | seed=%d | status=%s | iterations=%d | "
                    "evals=%d | distance=%.3e", result.label, seed, report.status.value,
                    report.iterations, report.total_evals, result.distance)
        return result

    def solve_seeds(self, label: Optional[str] = None, **overrides) -> List[RunResult]:
        return [self.solve(seed, label, **overrides) for seed in self.config.run.seed_list()]

    # ============== COMMANDS ==============

    def cmd_run(self, report_out=None, summary_out=None) -> List[RunResult]:
        output = self.config.output
        keep = output.residuals_csv is not None
        results = self.solve_seeds(keep_residuals=keep)
        write_csv(self.report_rows(results), REPORT_FIELDS, report_out or output.report_csv)
        summary = self.summary(results)
        summary_path = summary_out or output.summary_json
        if summary_path is not None:
            Path(summary_path).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        if keep:
            write_csv(self.residual_rows(results), RESIDUAL_FIELDS, output.residuals_csv)
        if output.trajectory is not None:
            for result in results:
                path = output.trajectory
                if len(results) > 1:
                    path = path.with_name(f"{path.stem}.seed{result.seed}{path.suffix}")
                save_trajectory(result.state, self.coeffs, path)
        return results

    def cmd_compare(self, variants: Optional[List[str]] = None, out=None) -> List[Dict]:
        labels = variants or self.config.compare.variants
        parsed = [(label, *parse_variant_label(label)) for label in labels]
        rows = []
        for label, variant, guarded, swept in parsed:
            if variant is Variant.FP and swept:
                results = self.best_fixed_point(label, guarded)
            elif variant is Variant.FP:
                # fixed point with k equal to the window is the Picard-style baseline
                w = self.config.solver.w or self.config.T
                results = self.solve_seeds(label, variant=variant, safeguard=guarded, k=w)
            else:
                results = self.solve_seeds(label, variant=variant, safeguard=guarded)
            rows.extend(self.compare_row(result) for result in results)
        write_csv(rows, COMPARE_FIELDS, out if out is not None else self.config.output.report_csv)
        return rows

    def best_fixed_point(self, label: str, guarded: bool) -> List[RunResult]:
        grid = self.config.compare.fp_plus_k_grid or self.config.default_k_grid()
        best = None
        for k in grid:
            results = self.solve_seeds(label, variant=Variant.FP, safeguard=guarded, k=k)
            score = (_mean([r.report.iterations for r in results]), k)
            if best is None or score < best[0]:
                best = (score, results)
        LOGGER.info("fp_plus_best | k=%d | mean_iterations=%.3f", best[0][1], best[0][0])
        return best[1]

    def cmd_sweep(self, k_grid=None, m_grid=None, out=None) -> List[Dict]:
        k_grid = k_grid or self.config.sweep.k_grid
        m_grid = m_grid or self.config.sweep.m_grid
        rows = []
        for k in k_grid:
            for m in m_grid:
                results = self.solve_seeds(f"k={k},m={m}", k=k, m=m)
                rows.append(dict(k=k, m=m, **self.aggregate(results)))
        write_csv(rows, SWEEP_FIELDS, out if out is not None else self.config.output.report_csv)
        return rows

    def cmd_windows(self, w_grid=None, out=None) -> List[Dict]:
        w_grid = w_grid or self.config.sweep.w_grid or [self.config.T]
        rows = []
        for w in w_grid:
            results = self.solve_seeds(f"w={w}", w=w)
            rows.append(dict(w=w, **self.aggregate(results)))
        write_csv(rows, WINDOW_FIELDS, out if out is not None else self.config.output.report_csv)
        return rows

    # ============== REPORTS ==============

    def aggregate(self, results: List[RunResult]) -> Dict:
        return {
            "mean_iterations": _mean([float(r.report.iterations) for r in results]),
            "mean_evals": _mean([float(r.report.total_evals) for r in results]),
            "converged_fraction": _mean([1.0 if r.converged else 0.0 for r in results]),
        }

    def compare_row(self, result: RunResult) -> Dict:
        return {
            "variant": result.label, "seed": result.seed, "k": result.cfg.k,
            "m": result.cfg.m, "status": result.report.status.value,
            "iterations": result.report.iterations, "evals": result.report.total_evals,
            "distance_to_oracle": result.distance,
        }

    def report_rows(self, results: List[RunResult]):
        for result in results:
            for rec in result.report.records:
                yield {
                    "seed": result.seed, "iteration": rec.iteration, "t1": rec.t1,
                    "t2": rec.t2, "sum_residual": rec.sum_residual,
                    "max_residual": rec.max_residual, "evals": rec.evals,
                    "wallclock_ms": rec.wallclock_ns / 1e6,
                }

    def residual_rows(self, results: List[RunResult]):
        thresholds = self.coeffs.thresholds
        for result in results:
            for rec in result.report.records:
                for t in range(rec.t1, rec.t2 + 1):
                    yield {"seed": result.seed, "iteration": rec.iteration, "timestep": t,
                           "residual": float(rec.residuals[t]),
                           "threshold": float(thresholds[t])}

    def summary(self, results: List[RunResult]) -> Dict:
        runs = [{
            "seed": r.seed,
            "status": r.report.status.value,
            "iterations": r.report.iterations,
            "total_evals": r.report.total_evals,
            "prefill_evals": r.report.prefill_evals,
            "certify_evals": r.report.certify_evals,
            "distance_to_oracle": r.distance,
        } for r in results]
        return {
            "config": self.config.source,
            "variant": self.config.solver.variant.value,
            "T": self.config.T,
            "d": self.config.d,
            "eta": self.config.schedule.eta,
            "runs": runs,
            "mean_iterations": _mean([float(r.report.iterations) for r in results]),
            "total_evals": sum(r.report.total_evals for r in results),
            "all_converged": all(r.converged for r in results),
        }
