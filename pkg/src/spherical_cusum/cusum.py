"""
Two-parameter studentized CUSUM statistic for coefficient panels.

For a panel beta_{ell m}(t), ell <= L, t = 1..N:

    A(r, s) = (N L)^(-1/2) sum_{t <= [N s]} sum_{lmin <= ell <= [L r]}
              (2 ell + 1)^(-1/2) sum_m (beta_{ell m}(t) - mu_hat_{ell m}) / sqrt(Cbar_ell)

The surface is evaluated on r_j = j/G_r, s_k = k/G_s (j, k from 0) with
two cumulative sums, after one pass that reduces the panel to a per-ell,
per-t array.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from spherical_cusum.errors import DegenerateMultipoleError, PreconditionError
from spherical_cusum.harmonics import CoefficientPanel, coefficient_index

if TYPE_CHECKING:
    from spherical_cusum.pillowcase import QuantileTable

logger = logging.getLogger(__name__)

DEFAULT_GRID = 300


@dataclass(frozen=True)
class SamplePowerSpectrum:
    """Cbar_ell for ell = 0..L."""

    cbar: np.ndarray

    def __getitem__(self, ell: int) -> float:
        return float(self.cbar[ell])


@dataclass(eq=False)
class StatisticSurface:
    """A_{L,N}(r_j, s_k) on a (grid_r + 1) x (grid_s + 1) lattice."""

    values: np.ndarray
    grid_r: int
    grid_s: int
    n_times: int
    lmax: int
    lmin: int

    @property
    def r_nodes(self) -> np.ndarray:
        return np.arange(self.grid_r + 1) / self.grid_r

    @property
    def s_nodes(self) -> np.ndarray:
        return np.arange(self.grid_s + 1) / self.grid_s

    @property
    def meta(self) -> dict[str, int]:
        return {"N": self.n_times, "L": self.lmax, "lmin": self.lmin,
                "grid_r": self.grid_r, "grid_s": self.grid_s}


@dataclass(frozen=True)
class Decision:
    reject: bool
    threshold: float


# ---------------------------------------------------------------------------
# Averages and spectra
# ---------------------------------------------------------------------------

def harmonic_averages(panel: CoefficientPanel) -> np.ndarray:
    """mu_hat_{ell m} = (1/N) sum_t beta_{ell m}(t), flat in (ell, m)."""
    return panel.values.mean(axis=1)


def _centered(panel: CoefficientPanel) -> np.ndarray:
    centered = panel.values - harmonic_averages(panel)[:, None]
    # rows constant in time center to exactly zero
    constant = np.ptp(panel.values, axis=1) == 0
    centered[constant] = 0.0
    return centered


def _cbar_from_centered(centered: np.ndarray, lmax: int, n_times: int) -> np.ndarray:
    cbar = np.empty(lmax + 1)
    squares = np.sum(centered * centered, axis=1)
    for ell in range(lmax + 1):
        cbar[ell] = squares[ell * ell:(ell + 1) ** 2].sum() / (n_times * (2 * ell + 1))
    return cbar


def sample_power_spectrum(panel: CoefficientPanel) -> SamplePowerSpectrum:
    """
    Cbar_ell = (1/(N(2 ell + 1))) sum_t sum_m (beta_{ell m}(t) - mu_hat_{ell m})**2.

    Raises:
        PreconditionError: If the panel has fewer than two time points.
    """
    if panel.n_times < 2:
        raise PreconditionError(f"sample power spectrum needs N >= 2, got N={panel.n_times}")
    centered = _centered(panel)
    return SamplePowerSpectrum(_cbar_from_centered(centered, panel.lmax, panel.n_times))


# ---------------------------------------------------------------------------
# Statistic surface
# ---------------------------------------------------------------------------

def _check_surface_args(panel: CoefficientPanel, lmin: int) -> None:
    if panel.n_times < 2:
        raise PreconditionError(f"the statistic needs N >= 2, got N={panel.n_times}")
    if panel.lmax < 1:
        raise PreconditionError("the statistic needs lmax >= 1 for the (N L)^(-1/2) scaling")
    if not 0 <= lmin <= panel.lmax:
        raise PreconditionError(f"lmin must lie in 0..{panel.lmax}, got {lmin}")


def multipole_cumulative_sums(panel: CoefficientPanel, lmin: int = 0) -> np.ndarray:
    """
    Double cumulative sum S[ell, t] of the studentized multipole sums.

    S[ell, t] = sum_{lmin <= ell' <= ell} sum_{t' <= t} z_{ell'}(t') with
    z_ell(t) = (2 ell + 1)^(-1/2) sum_m (beta - mu_hat) / sqrt(Cbar_ell),
    t 0-based. Not yet scaled by (N L)^(-1/2).

    Raises:
        DegenerateMultipoleError: If Cbar_ell = 0 for some ell in [lmin, lmax].
    """
    _check_surface_args(panel, lmin)
    lmax, n_times = panel.lmax, panel.n_times
    centered = _centered(panel)
    cbar = _cbar_from_centered(centered, lmax, n_times)

    z = np.zeros((lmax + 1, n_times))
    for ell in range(lmin, lmax + 1):
        if cbar[ell] == 0:
            raise DegenerateMultipoleError(ell)
        rows = centered[ell * ell:(ell + 1) ** 2]
        z[ell] = rows.sum(axis=0) / np.sqrt(cbar[ell] * (2 * ell + 1))
    return np.cumsum(np.cumsum(z, axis=0), axis=1)


def statistic_surface(panel: CoefficientPanel, lmin: int = 0,
                      grid_r: int = DEFAULT_GRID, grid_s: int = DEFAULT_GRID) -> StatisticSurface:
    """
    Evaluate A_{L,N}(r_j, s_k) for j = 0..grid_r and k = 0..grid_s.

    Entries with [N s] < 1 or [L r] < lmin are empty sums (zero); the s = 1
    column is zero by full-sample centering and is stored as exactly 0.

    Args:
        panel: Coefficient panel with N >= 2 and lmax >= 1.
        lmin: First multipole included in the sum.
        grid_r: Number of r intervals.
        grid_s: Number of s intervals.

    Raises:
        PreconditionError: On invalid sizes or lmin outside 0..lmax.
        DegenerateMultipoleError: If Cbar_ell = 0 for some ell >= lmin.
    """
    if grid_r < 1 or grid_s < 1:
        raise PreconditionError(f"grid sizes must be >= 1, got {grid_r}x{grid_s}")
    cumulative = multipole_cumulative_sums(panel, lmin)
    lmax, n_times = panel.lmax, panel.n_times

    ell_top = (lmax * np.arange(grid_r + 1)) // grid_r
    t_count = (n_times * np.arange(grid_s + 1)) // grid_s

    values = np.zeros((grid_r + 1, grid_s + 1))
    rows = ell_top >= lmin
    cols = t_count >= 1
    values[np.ix_(rows, cols)] = cumulative[np.ix_(ell_top[rows], t_count[cols] - 1)]
    values /= np.sqrt(n_times * lmax)
    values[:, grid_s] = 0.0
    return StatisticSurface(values, grid_r, grid_s, n_times, lmax, lmin)


def statistic_at(panel: CoefficientPanel, points: Sequence[tuple[float, float]],
                 lmin: int = 0) -> np.ndarray:
    """A_{L,N}(r, s) at arbitrary (r, s) in [0, 1]^2."""
    cumulative = multipole_cumulative_sums(panel, lmin)
    lmax, n_times = panel.lmax, panel.n_times
    out = np.zeros(len(points))
    for i, (r, s) in enumerate(points):
        if not (0.0 <= r <= 1.0 and 0.0 <= s <= 1.0):
            raise PreconditionError(f"(r, s) must lie in [0, 1]^2, got ({r}, {s})")
        ell = int(np.floor(lmax * r + 1e-12))
        count = int(np.floor(n_times * s + 1e-12))
        if count < 1 or ell < lmin or count == n_times:
            continue
        out[i] = cumulative[ell, count - 1] / np.sqrt(n_times * lmax)
    return out


def surface_brute_force(panel: CoefficientPanel, lmin: int = 0,
                        grid_r: int = DEFAULT_GRID, grid_s: int = DEFAULT_GRID) -> np.ndarray:
    """Direct quadruple-loop evaluation of the surface; reference oracle for small panels."""
    _check_surface_args(panel, lmin)
    lmax, n_times = panel.lmax, panel.n_times
    mu_hat = harmonic_averages(panel)
    cbar = sample_power_spectrum(panel).cbar
    values = np.zeros((grid_r + 1, grid_s + 1))
    for j in range(grid_r + 1):
        top = (lmax * j) // grid_r
        for k in range(grid_s + 1):
            count = (n_times * k) // grid_s
            total = 0.0
            for t in range(count):
                for ell in range(lmin, top + 1):
                    for m in range(-ell, ell + 1):
                        idx = coefficient_index(ell, m)
                        total += (panel.values[idx, t] - mu_hat[idx]) / (
                            np.sqrt(cbar[ell]) * np.sqrt(2 * ell + 1)
                        )
            values[j, k] = total / np.sqrt(n_times * lmax)
    return values


def sup_statistic(surface: StatisticSurface) -> float:
    """Largest |A| over the grid."""
    return float(np.max(np.abs(surface.values)))


def statistic_from_panel(panel: CoefficientPanel, lmin: int = 0,
                         grid: int = DEFAULT_GRID) -> tuple[StatisticSurface, float]:
    surface = statistic_surface(panel, lmin, grid, grid)
    return surface, sup_statistic(surface)


# ---------------------------------------------------------------------------
# Decisions
# ---------------------------------------------------------------------------

def decide(sup: float, table: QuantileTable, level: float) -> Decision:
    """
    Reject iff sup is strictly above the table's threshold at level.

    Raises:
        PreconditionError: If level is not in the table.
    """
    threshold = table.threshold(level)
    return Decision(reject=bool(sup > threshold), threshold=threshold)


def decide_all(sup: float, table: QuantileTable) -> dict[float, Decision]:
    return {level: decide(sup, table, level) for level in table.levels}


def reject_counts(sups: Iterable[float], table: QuantileTable) -> np.ndarray:
    """Number of sups strictly above each threshold, in table order."""
    sups = np.asarray(list(sups), dtype=float)
    return np.array([(sups > q).sum() for q in table.thresholds], dtype=int)
