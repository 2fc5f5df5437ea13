"""
Brownian pillowcase sampling and sup-norm quantile calibration.

The pillowcase is the zero-mean Gaussian process on [0, 1]^2 with covariance
(r ^ r') * ((s ^ s') - s s'). It is approximated by

    W_n(r, s) = n^(-1/2) sum_{i=1..n} B_i(r) b_i(s)

with independent Brownian motions B_i and Brownian bridges b_i on a
regular grid, and thresholds are order statistics of sup |W_n| over B
independent draws.

Run standalone:
    python -m spherical_cusum quantiles --grid 100 --inner-n 1000 --draws 500
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import partial
from typing import Any

import numpy as np

from spherical_cusum.errors import PreconditionError
from spherical_cusum.streams import run_indexed, substream

logger = logging.getLogger(__name__)

MIN_DRAWS = 100
DEFAULT_LEVELS = (0.90, 0.95, 0.99)
REFERENCE_THRESHOLDS = (1.2911, 1.4142, 1.7104)
LEVEL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class QuantileTable:
    """Rejection thresholds by level, with the Monte Carlo settings that produced them."""

    levels: tuple[float, ...]
    thresholds: tuple[float, ...]
    grid: int | None = None
    inner_n: int | None = None
    draws: int | None = None
    seed: int | None = None
    sups: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        thresholds = tuple(float(v) for v in self.thresholds)
        if not levels or len(levels) != len(thresholds):
            raise PreconditionError("a quantile table needs matching, nonempty levels and thresholds")
        if any(not 0.0 < v < 1.0 for v in levels):
            raise PreconditionError(f"levels must lie in (0, 1), got {list(levels)}")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise PreconditionError("levels must be strictly increasing")
        if any(q <= 0 for q in thresholds):
            raise PreconditionError("thresholds must be positive")
        if any(b < a for a, b in zip(thresholds, thresholds[1:])):
            raise PreconditionError("thresholds must not decrease with the level")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "thresholds", thresholds)

    @classmethod
    def reference(cls) -> QuantileTable:
        """Thresholds from a G=300, n=10000, B=2000 calibration."""
        return cls(DEFAULT_LEVELS, REFERENCE_THRESHOLDS, grid=300, inner_n=10000, draws=2000)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> QuantileTable:
        try:
            levels, thresholds = data["levels"], data["thresholds"]
        except KeyError as exc:
            raise PreconditionError(f"quantile table is missing key {exc.args[0]!r}") from None
        return cls(
            tuple(levels), tuple(thresholds),
            grid=data.get("grid"), inner_n=data.get("inner_n"),
            draws=data.get("draws"), seed=data.get("seed"),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "levels": list(self.levels),
            "thresholds": list(self.thresholds),
            "grid": self.grid,
            "inner_n": self.inner_n,
            "draws": self.draws,
            "seed": self.seed,
        }

    def threshold(self, level: float) -> float:
        for known, q in zip(self.levels, self.thresholds):
            if abs(known - level) <= LEVEL_TOLERANCE:
                return q
        raise PreconditionError(
            f"level {level} is not in the quantile table (levels: {list(self.levels)})"
        )


# ---------------------------------------------------------------------------
# Path samplers
# ---------------------------------------------------------------------------

def sample_bm(grid: int, stream: np.random.Generator) -> np.ndarray:
    """Brownian motion at k/grid, k = 1..grid, from N(0, 1/grid) increments."""
    if grid < 1:
        raise PreconditionError(f"grid must be >= 1, got {grid}")
    return np.cumsum(stream.standard_normal(grid) * np.sqrt(1.0 / grid))


def sample_bridge(grid: int, stream: np.random.Generator) -> np.ndarray:
    """Brownian bridge at k/grid, k = 1..grid; the last entry is exactly 0."""
    path = sample_bm(grid, stream)
    bridge = path - (np.arange(1, grid + 1) / grid) * path[-1]
    bridge[-1] = 0.0
    return bridge


def sample_pillowcase(grid: int, inner_n: int, stream: np.random.Generator) -> np.ndarray:
    """
    One draw of W_n on the (grid+1) x (grid+1) lattice (r rows, s columns).

    Row 0 (r=0), column 0 (s=0) and the last column (s=1) are exactly 0.
    """
    if grid < 1:
        raise PreconditionError(f"grid must be >= 1, got {grid}")
    if inner_n < 1:
        raise PreconditionError(f"inner_n must be >= 1, got {inner_n}")
    scale = np.sqrt(1.0 / grid)
    motions = np.cumsum(stream.standard_normal((inner_n, grid)) * scale, axis=1)
    bridges = np.cumsum(stream.standard_normal((inner_n, grid)) * scale, axis=1)
    bridges -= (np.arange(1, grid + 1) / grid) * bridges[:, -1:]
    bridges[:, -1] = 0.0

    out = np.zeros((grid + 1, grid + 1))
    out[1:, 1:] = motions.T @ bridges / np.sqrt(inner_n)
    return out


def pillowcase_covariance(r: float, s: float, r2: float, s2: float) -> float:
    """(r ^ r2) * ((s ^ s2) - s * s2)."""
    for name, value in (("r", r), ("s", s), ("r2", r2), ("s2", s2)):
        if not 0.0 <= value <= 1.0:
            raise PreconditionError(f"{name} must lie in [0, 1], got {value}")
    return min(r, r2) * (min(s, s2) - s * s2)


# ---------------------------------------------------------------------------
# Quantile estimation
# ---------------------------------------------------------------------------

def _sup_of_draw(index: int, grid: int, inner_n: int, seed: int) -> float:
    return float(np.max(np.abs(sample_pillowcase(grid, inner_n, substream(seed, index)))))


def order_statistic_rank(level: float, draws: int) -> int:
    """1-based rank ceil(level * draws) used as the level quantile."""
    return max(1, math.ceil(round(level * draws, 9)))


def estimate_quantiles(
    grid: int = 300,
    inner_n: int = 10000,
    draws: int = 2000,
    levels: Sequence[float] = DEFAULT_LEVELS,
    seed: int = 0,
    workers: int | None = 1,
) -> QuantileTable:
    """
    Monte Carlo quantiles of sup |W_n| over the closed grid.

    Draw b uses substream (seed, b), so the table depends only on
    (grid, inner_n, draws, levels, seed) and not on workers.

    Args:
        grid: Number of grid intervals G.
        inner_n: Number of (motion, bridge) pairs n per draw.
        draws: Number of draws B (>= 100).
        levels: Levels in (0, 1).
        seed: Run seed.
        workers: Worker processes (None = one per core).

    Returns:
        QuantileTable whose sups attribute holds the sorted draws.

    Raises:
        PreconditionError: On invalid sizes or levels.
    """
    if draws < MIN_DRAWS:
        raise PreconditionError(f"draws below minimum {MIN_DRAWS} (got {draws})")
    if grid < 1 or inner_n < 1:
        raise PreconditionError(f"grid and inner_n must be >= 1, got {grid}, {inner_n}")
    levels = sorted(float(v) for v in levels)
    if not levels or any(not 0.0 < v < 1.0 for v in levels):
        raise PreconditionError(f"levels must be nonempty and lie in (0, 1), got {levels}")

    logger.info(
        "Estimating pillowcase quantiles: grid=%d inner_n=%d draws=%d seed=%d",
        grid, inner_n, draws, seed,
    )
    start = time.perf_counter()
    sups = np.sort(np.array(run_indexed(
        partial(_sup_of_draw, grid=grid, inner_n=inner_n, seed=seed), range(draws), workers,
    )))
    thresholds = [float(sups[order_statistic_rank(level, draws) - 1]) for level in levels]
    logger.info(
        f"Quantiles done in {time.perf_counter() - start:.1f}s: "
        + ", ".join(f"q{level:g}={q:.4f}" for level, q in zip(levels, thresholds))
    )
    return QuantileTable(
        tuple(levels), tuple(thresholds), grid=grid, inner_n=inner_n,
        draws=draws, seed=seed, sups=sups,
    )
