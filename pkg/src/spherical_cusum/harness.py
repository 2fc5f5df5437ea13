"""
Monte Carlo experiment drivers.

    run_rejection_experiment  rejection frequencies (Type I error or power)
    power_curve               the same experiment across several N
    multiscale_scan           sup statistic of one panel for several lmin
    covariance_check          empirical covariance of A(r, s) against the
                              pillowcase covariance

Replicate b of an experiment simulates from substream (seed, b), so results
do not depend on the number of worker processes.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import partial
from typing import Any

import numpy as np

from spherical_cusum.config import ExperimentConfig
from spherical_cusum.cusum import (
    decide_all,
    reject_counts,
    statistic_at,
    statistic_from_panel,
)
from spherical_cusum.errors import PreconditionError, ReplicateError, SphericalCusumError
from spherical_cusum.fields import (
    AngularPowerSpectrum,
    MeanScenario,
    TemporalModel,
    simulate_panel,
)
from spherical_cusum.harmonics import CoefficientPanel
from spherical_cusum.pillowcase import QuantileTable, pillowcase_covariance
from spherical_cusum.streams import run_indexed

logger = logging.getLogger(__name__)

__all__ = [
    "CovarianceEntry",
    "ExperimentConfig",
    "RejectionTable",
    "ScanEntry",
    "covariance_check",
    "multiscale_scan",
    "power_curve",
    "run_rejection_experiment",
]


@dataclass
class RejectionTable:
    """Rejection frequencies per level with binomial standard errors."""

    levels: list[float]
    frequencies: list[float]
    standard_errors: list[float]
    replicates: int
    config: dict[str, Any]
    wall_time: float = 0.0
    sups: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "levels": self.levels,
            "frequencies": self.frequencies,
            "standard_errors": self.standard_errors,
            "wall_time": self.wall_time,
        }


@dataclass
class ScanEntry:
    lmin: int
    sup: float | None
    reject: dict[float, bool]
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "lmin": self.lmin,
            "sup": self.sup,
            "reject": {f"{level:g}": flag for level, flag in self.reject.items()},
            "error": self.error,
        }


@dataclass
class CovarianceEntry:
    pair: tuple[tuple[float, float], tuple[float, float]]
    empirical_cov: float
    target: float
    z_score: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair": [list(self.pair[0]), list(self.pair[1])],
            "empirical_cov": self.empirical_cov,
            "target": self.target,
            "z_score": self.z_score,
        }


# ---------------------------------------------------------------------------
# Replicate workers (module level so process pools can pickle them)
# ---------------------------------------------------------------------------

def _simulate_replicate(index: int, spectrum: AngularPowerSpectrum, temporal: TemporalModel,
                        scenario: MeanScenario, n_times: int, lmax: int,
                        seed: int) -> CoefficientPanel:
    return simulate_panel(spectrum, temporal, scenario, n_times, lmax, seed, (index,))


def _replicate_sup(index: int, lmin: int, grid: int, **simulation: Any) -> float:
    try:
        panel = _simulate_replicate(index, **simulation)
        return statistic_from_panel(panel, lmin, grid)[1]
    except SphericalCusumError as exc:
        raise ReplicateError(index, exc) from exc


def _replicate_values(index: int, lmin: int, points: Sequence[tuple[float, float]],
                      **simulation: Any) -> np.ndarray:
    try:
        panel = _simulate_replicate(index, **simulation)
        return statistic_at(panel, points, lmin)
    except SphericalCusumError as exc:
        raise ReplicateError(index, exc) from exc


def _simulation_kwargs(config: ExperimentConfig) -> dict[str, Any]:
    return {
        "spectrum": config.spectrum,
        "temporal": config.temporal,
        "scenario": config.scenario(),
        "n_times": config.n_times,
        "lmax": config.lmax,
        "seed": config.seed,
    }


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_rejection_experiment(config: ExperimentConfig,
                             workers: int | None = None) -> RejectionTable:
    """
    Simulate config.replicates panels and count sup statistics above each threshold.

    Args:
        config: Experiment settings.
        workers: Worker processes; defaults to config.workers, then one per core.

    Returns:
        RejectionTable with frequencies, standard errors sqrt(p(1-p)/B)
        and the per-replicate sups.

    Raises:
        ReplicateError: If any replicate fails; the experiment is aborted.
    """
    table = config.quantiles
    workers = workers if workers is not None else config.workers
    logger.info(
        "Running %s experiment: model=%d alpha=%g N=%d L=%d lmin=%d B=%d seed=%d",
        config.hypothesis.upper(), config.model, config.alpha, config.n_times,
        config.lmax, config.lmin, config.replicates, config.seed,
    )
    start = time.perf_counter()
    task = partial(_replicate_sup, lmin=config.lmin, grid=config.grid,
                   **_simulation_kwargs(config))
    sups = np.array(run_indexed(task, range(config.replicates), workers))
    wall_time = time.perf_counter() - start

    counts = reject_counts(sups, table)
    frequencies = counts / config.replicates
    errors = np.sqrt(frequencies * (1.0 - frequencies) / config.replicates)
    logger.info(
        f"Experiment finished in {wall_time:.1f}s: "
        + ", ".join(f"{level:g}->{p:.4f}" for level, p in zip(table.levels, frequencies))
    )
    return RejectionTable(
        levels=list(table.levels),
        frequencies=[float(p) for p in frequencies],
        standard_errors=[float(se) for se in errors],
        replicates=config.replicates,
        config=config.to_dict(),
        wall_time=wall_time,
        sups=sups,
    )


def power_curve(config: ExperimentConfig, n_values: Iterable[int],
                workers: int | None = None) -> list[RejectionTable]:
    """Rerun the rejection experiment for each N in n_values."""
    return [run_rejection_experiment(config.with_n_times(n), workers) for n in n_values]


def multiscale_scan(panel: CoefficientPanel, lmin_list: Sequence[int], grid: int,
                    table: QuantileTable) -> list[ScanEntry]:
    """
    Sup statistic and decisions for each summation start in lmin_list.

    Entries that fail (for instance on a degenerate multipole) carry the
    error message and the scan continues.

    Raises:
        PreconditionError: If lmin_list is empty or an lmin exceeds panel.lmax.
    """
    if not lmin_list:
        raise PreconditionError("lmin list must not be empty")
    too_large = [lmin for lmin in lmin_list if not 0 <= lmin <= panel.lmax]
    if too_large:
        raise PreconditionError(
            f"lmin values {too_large} fall outside 0..{panel.lmax} for this panel"
        )
    entries = []
    for lmin in lmin_list:
        try:
            _, sup = statistic_from_panel(panel, lmin, grid)
        except SphericalCusumError as exc:
            logger.warning("Scan entry lmin=%d failed: %s", lmin, exc)
            entries.append(ScanEntry(lmin, None, {}, str(exc)))
            continue
        decisions = decide_all(sup, table)
        entries.append(ScanEntry(lmin, sup, {level: d.reject for level, d in decisions.items()}))
    return entries


def covariance_check(config: ExperimentConfig,
                     point_pairs: Sequence[tuple[tuple[float, float], tuple[float, float]]],
                     workers: int | None = None) -> list[CovarianceEntry]:
    """
    Compare the empirical covariance of (A(x), A(y)) with the pillowcase limit.

    z_score is (empirical - target) / standard error of the covariance
    estimate; it is 0 when both the estimate and its error vanish.

    Raises:
        PreconditionError: If config is not an H0 experiment.
    """
    if config.hypothesis != "h0":
        raise PreconditionError("covariance_check needs an H0 configuration")
    points = sorted({tuple(map(float, p)) for pair in point_pairs for p in pair})
    position = {p: i for i, p in enumerate(points)}

    workers = workers if workers is not None else config.workers
    logger.info("Covariance check at %d points over %d replicates", len(points),
                config.replicates)
    task = partial(_replicate_values, lmin=config.lmin, points=points,
                   **_simulation_kwargs(config))
    samples = np.array(run_indexed(task, range(config.replicates), workers))

    entries = []
    for x, y in point_pairs:
        a = samples[:, position[tuple(map(float, x))]]
        b = samples[:, position[tuple(map(float, y))]]
        products = (a - a.mean()) * (b - b.mean())
        empirical = float(products.sum() / max(len(products) - 1, 1))
        stderr = float(products.std(ddof=1) / np.sqrt(len(products))) if len(products) > 1 else 0.0
        target = pillowcase_covariance(x[0], x[1], y[0], y[1])
        if stderr > 0:
            z = (empirical - target) / stderr
        else:
            z = 0.0 if abs(empirical - target) <= 1e-12 else float("inf")
        entries.append(CovarianceEntry((tuple(x), tuple(y)), empirical, target, float(z)))
    return entries
