"""
Gridded temperature ingestion: monthly lat-lon data to a coefficient panel.

Stages:
    1. read_latlon_csv       long-form CSV (year,month,lat,lon,value) to a cube
    2. compute_anomalies     subtract per-cell calendar-month base means
    3. annual_average        average complete years, drop partial ones
    4. regrid_to_cubature    bilinear interpolation onto a Gauss grid
    5. analyze               harmonic coefficients up to lmax

pipeline() chains all five. make_synthetic_globe() writes test and demo
inputs with a known trend structure.

Usage:
    from spherical_cusum.ingest import pipeline

    panel = pipeline("surface_temp.csv", base=(1981, 2010), lmax=32, lstar=64)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from spherical_cusum.errors import PreconditionError, SchemaError
from spherical_cusum.fields import AngularPowerSpectrum, TemporalModel, scenario_preset, simulate_panel
from spherical_cusum.harmonics import (
    CoefficientPanel,
    CubatureGrid,
    FieldSnapshot,
    analyze,
    build_gauss_grid,
    synthesize_at,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["year", "month", "lat", "lon", "value"]
SPACING_TOLERANCE = 1e-6
FILL_POLICIES = (None, "nearest")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LatLonSeries:
    """Values on a regular lat-lon grid, shape (time, lat, lon), degrees Celsius."""

    lats: np.ndarray
    lons: np.ndarray
    times: list[tuple[int, int]]
    values: np.ndarray

    def __post_init__(self):
        self.lats = np.asarray(self.lats, dtype=float)
        self.lons = np.asarray(self.lons, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.times = [(int(y), int(m)) for y, m in self.times]
        expected = (len(self.times), self.lats.size, self.lons.size)
        if self.values.shape != expected:
            raise SchemaError(f"values must have shape {expected}, got {self.values.shape}")
        _check_regular(self.lats, "latitude")
        _check_regular(self.lons, "longitude")

    @property
    def years(self) -> np.ndarray:
        return np.array([y for y, _ in self.times], dtype=int)

    @property
    def months(self) -> np.ndarray:
        return np.array([m for _, m in self.times], dtype=int)


@dataclass(eq=False)
class AnomalySeries(LatLonSeries):
    """
    Anomalies relative to base-period monthly means.

    frequency is "monthly" or "annual"; annual series use month 0 in times.
    warnings holds records of years dropped by annual_average.
    """

    base: tuple[int, int] = (0, 0)
    frequency: str = "monthly"
    warnings: list[dict[str, Any]] = field(default_factory=list)


def _check_regular(axis: np.ndarray, name: str) -> None:
    if axis.size < 2:
        return
    steps = np.diff(axis)
    if np.any(steps == 0) or np.ptp(steps) > SPACING_TOLERANCE:
        raise SchemaError(f"irregular {name} grid: spacing varies between "
                          f"{steps.min():g} and {steps.max():g} degrees")


# ---------------------------------------------------------------------------
# CSV input and output
# ---------------------------------------------------------------------------

def _fill_nearest(cube: np.ndarray) -> int:
    """Fill NaN cells of each time slice from the nearest valid cell; returns fill count."""
    filled = 0
    for t in range(cube.shape[0]):
        missing = np.isnan(cube[t])
        if not missing.any():
            continue
        if missing.all():
            raise SchemaError(f"time index {t} has no valid cells to fill from")
        indices = ndimage.distance_transform_edt(
            missing, return_distances=False, return_indices=True
        )
        cube[t] = cube[t][tuple(indices)]
        filled += int(missing.sum())
    return filled


def read_latlon_csv(path: str | Path, fill: str | None = None) -> LatLonSeries:
    """
    Read a long-form lat-lon CSV into a validated cube.

    Args:
        path: CSV with header year,month,lat,lon,value (rows in any order).
        fill: None to fail on missing cells, "nearest" to fill each month's
            gaps from the nearest valid cell.

    Raises:
        SchemaError: On header or value violations, duplicate rows, an
            irregular grid, or a missing cell when fill is None.
    """
    if fill not in FILL_POLICIES:
        raise PreconditionError(f"fill must be None or 'nearest', got {fill!r}")
    try:
        frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: unreadable CSV: {exc}") from exc
    missing_columns = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing_columns:
        raise SchemaError(f"{path}: missing CSV columns: {', '.join(missing_columns)}")
    frame = frame[CSV_COLUMNS]
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")

    for column in ("year", "month"):
        if not pd.api.types.is_integer_dtype(frame[column]):
            raise SchemaError(f"{path}: column {column!r} must hold integers")
    if not frame["month"].between(1, 12).all():
        raise SchemaError(f"{path}: month values must lie in 1..12")
    if not frame["lat"].between(-90.0, 90.0).all():
        raise SchemaError(f"{path}: latitudes must lie in [-90, 90]")
    if not ((frame["lon"] >= 0.0) & (frame["lon"] < 360.0)).all():
        raise SchemaError(f"{path}: longitudes must lie in [0, 360)")
    duplicated = frame.duplicated(subset=["year", "month", "lat", "lon"])
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise SchemaError(
            f"{path}: duplicate cell (time={int(row.year)}-{int(row.month):02d}, "
            f"lat={row.lat:g}, lon={row.lon:g})"
        )

    lats = np.sort(frame["lat"].unique())
    lons = np.sort(frame["lon"].unique())
    times = sorted({(int(y), int(m)) for y, m in zip(frame["year"], frame["month"])})
    _check_regular(lats, "latitude")
    _check_regular(lons, "longitude")

    time_pos = {t: i for i, t in enumerate(times)}
    t_idx = np.array([time_pos[(int(y), int(m))] for y, m in zip(frame["year"], frame["month"])])
    lat_idx = np.searchsorted(lats, frame["lat"].to_numpy())
    lon_idx = np.searchsorted(lons, frame["lon"].to_numpy())
    cube = np.full((len(times), lats.size, lons.size), np.nan)
    try:
        cube[t_idx, lat_idx, lon_idx] = frame["value"].to_numpy(dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: column 'value' must hold numbers") from exc

    gaps = np.isnan(cube)
    if gaps.any():
        if fill is None:
            t, i, j = np.argwhere(gaps)[0]
            year, month = times[t]
            raise SchemaError(
                f"{path}: missing value at (time={year}-{month:02d}, lat={lats[i]:g}, "
                f"lon={lons[j]:g}); pass fill='nearest' to fill gaps"
            )
        filled = _fill_nearest(cube)
        logger.warning("Filled %d missing cells from their nearest neighbours", filled)

    return LatLonSeries(lats, lons, times, cube)


def write_latlon_csv(series: LatLonSeries, path: str | Path) -> None:
    """Write a series in the long-form CSV layout read_latlon_csv accepts."""
    n_t, n_lat, n_lon = series.values.shape
    t_idx, lat_idx, lon_idx = np.meshgrid(
        np.arange(n_t), np.arange(n_lat), np.arange(n_lon), indexing="ij"
    )
    frame = pd.DataFrame({
        "year": series.years[t_idx.ravel()],
        "month": series.months[t_idx.ravel()],
        "lat": series.lats[lat_idx.ravel()],
        "lon": series.lons[lon_idx.ravel()],
        "value": series.values.ravel(),
    })
    frame.to_csv(path, index=False)


# ---------------------------------------------------------------------------
# Anomalies and annual means
# ---------------------------------------------------------------------------

def compute_anomalies(series: LatLonSeries, base_start: int, base_end: int) -> AnomalySeries:
    """
    Subtract, per cell and calendar month, the mean over base-period years.

    Raises:
        PreconditionError: If any month of the base period is absent.
    """
    if base_end < base_start:
        raise PreconditionError(f"base period {base_start}-{base_end} is empty")
    present = set(series.times)
    absent = [(y, m) for y in range(base_start, base_end + 1) for m in range(1, 13)
              if (y, m) not in present]
    if absent:
        y, m = absent[0]
        raise PreconditionError(
            f"base period {base_start}-{base_end} not covered by the data "
            f"({len(absent)} months absent, first {y}-{m:02d})"
        )

    years, months = series.years, series.months
    in_base = (years >= base_start) & (years <= base_end)
    anomalies = np.empty_like(series.values)
    for month in range(1, 13):
        rows = months == month
        if not rows.any():
            continue
        climatology = series.values[rows & in_base].mean(axis=0)
        anomalies[rows] = series.values[rows] - climatology
    return AnomalySeries(series.lats, series.lons, list(series.times), anomalies,
                         base=(base_start, base_end), frequency="monthly")


def annual_average(anomalies: AnomalySeries) -> AnomalySeries:
    """
    Per-cell mean of the 12 monthly values of each complete year.

    Years with missing months are dropped and described in warnings.
    """
    by_year: dict[int, list[int]] = {}
    for i, (year, _) in enumerate(anomalies.times):
        by_year.setdefault(year, []).append(i)

    kept, values, warnings = [], [], []
    for year in sorted(by_year):
        rows = by_year[year]
        months = sorted(anomalies.times[i][1] for i in rows)
        if months != list(range(1, 13)):
            logger.warning("Dropping year %d: only %d of 12 months present", year, len(months))
            warnings.append({
                "event_type": "partial_year_dropped",
                "year": year,
                "months_present": months,
            })
            continue
        kept.append((year, 0))
        values.append(anomalies.values[rows].mean(axis=0))

    if not kept:
        raise PreconditionError("no complete year left after annual averaging")
    return AnomalySeries(anomalies.lats, anomalies.lons, kept, np.stack(values),
                         base=anomalies.base, frequency="annual",
                         warnings=list(anomalies.warnings) + warnings)


# ---------------------------------------------------------------------------
# Regridding
# ---------------------------------------------------------------------------

def regrid_to_cubature(anomalies: LatLonSeries, grid: CubatureGrid) -> FieldSnapshot:
    """
    Bilinear interpolation of every time slice onto the grid nodes.

    Longitude wraps around; target latitudes beyond the outermost data rows
    are clamped to them.

    Raises:
        PreconditionError: If the longitudes do not cover the full circle.
    """
    lats, lons = anomalies.lats, anomalies.lons
    values = anomalies.values
    if lats[0] > lats[-1]:
        lats, values = lats[::-1], values[:, ::-1, :]
    if lons.size < 2 or abs((lons[1] - lons[0]) * lons.size - 360.0) > SPACING_TOLERANCE:
        raise PreconditionError("longitudes must cover the full circle at regular spacing")

    lon_ext = np.append(lons, lons[0] + 360.0)
    cube = np.concatenate([values, values[:, :, :1]], axis=2)
    # (lat, lon, time) so the interpolator returns one column per time
    interpolator = RegularGridInterpolator(
        (lats, lon_ext), np.moveaxis(cube, 0, -1), method="linear"
    )

    target_lat = np.clip(90.0 - np.degrees(grid.theta), lats[0], lats[-1])
    target_lon = np.degrees(grid.phi)
    target_lon = np.where(target_lon < lons[0], target_lon + 360.0, target_lon)
    samples = interpolator(np.column_stack([target_lat, target_lon]))
    return FieldSnapshot(grid, samples)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    panel: CoefficientPanel
    annual: AnomalySeries
    warnings: list[dict[str, Any]]


def run_pipeline(path: str | Path, base: tuple[int, int], lmax: int = 32, lstar: int = 64,
                 fill: str | None = None) -> PipelineResult:
    """read -> anomalies -> annual -> regrid -> analyze, keeping intermediate results."""
    if lmax > lstar:
        raise PreconditionError(f"lmax={lmax} must not exceed lstar={lstar}")
    logger.info("Ingesting %s (base %d-%d, lmax=%d, lstar=%d)", path, base[0], base[1], lmax, lstar)
    series = read_latlon_csv(path, fill=fill)
    annual = annual_average(compute_anomalies(series, base[0], base[1]))
    if len(annual.times) < 2:
        raise PreconditionError(f"need at least 2 complete years, got {len(annual.times)}")
    snapshot = regrid_to_cubature(annual, build_gauss_grid(lstar))
    panel = analyze(snapshot, lmax)
    logger.info("Ingested %d complete years into a lmax=%d panel", panel.n_times, lmax)
    return PipelineResult(panel, annual, annual.warnings)


def pipeline(path: str | Path, base: tuple[int, int], lmax: int = 32, lstar: int = 64,
             fill: str | None = None) -> CoefficientPanel:
    return run_pipeline(path, base, lmax, lstar, fill).panel


# ---------------------------------------------------------------------------
# Synthetic inputs
# ---------------------------------------------------------------------------

def latlon_axes(step_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Pole-to-pole latitudes and [0, 360) longitudes at a regular step."""
    n_lat = int(round(180.0 / step_deg)) + 1
    n_lon = int(round(360.0 / step_deg))
    return np.linspace(-90.0, 90.0, n_lat), np.arange(n_lon) * (360.0 / n_lon)


def seasonal_climatology(lats: np.ndarray, month: int) -> np.ndarray:
    """Deterministic monthly climatology by latitude, degrees Celsius."""
    lat = np.radians(lats)
    season = np.cos(2.0 * np.pi * (month - 1) / 12.0)
    return 28.0 * np.cos(lat) ** 2 - 12.0 - 15.0 * np.sin(lat) * season


def globe_from_panel(panel: CoefficientPanel, first_year: int, step_deg: float = 2.5,
                     climatology: bool = True) -> LatLonSeries:
    """
    Monthly lat-lon series whose annual field in year first_year + t - 1 is
    the panel's field at time t, plus an optional seasonal climatology.
    """
    lats, lons = latlon_axes(step_deg)
    lat_grid, lon_grid = np.meshgrid(lats, lons, indexing="ij")
    theta = np.radians(90.0 - lat_grid.ravel())
    phi = np.radians(lon_grid.ravel())
    annual = synthesize_at(panel, theta, phi).T.reshape(panel.n_times, lats.size, lons.size)

    times, values = [], []
    for t in range(panel.n_times):
        for month in range(1, 13):
            slice_ = annual[t].copy()
            if climatology:
                slice_ += seasonal_climatology(lats, month)[:, None]
            times.append((first_year + t, month))
            values.append(slice_)
    return LatLonSeries(lats, lons, times, np.stack(values))


def make_synthetic_globe(
    first_year: int = 1981,
    last_year: int = 2020,
    step_deg: float = 5.0,
    lmax: int = 8,
    model: int = 2,
    alpha: float = 1.0,
    seed: int = 0,
    climatology: bool = True,
) -> LatLonSeries:
    """
    Monthly globe with a trending mean of the given model plus Gaussian noise.

    The annual fields are a simulated panel (rational spectrum, iid in time,
    time-varying mean preset) band-limited to lmax.
    """
    n_years = last_year - first_year + 1
    scenario = scenario_preset(model, time_varying=alpha > 0, alpha=alpha, lmax=lmax)
    panel = simulate_panel(AngularPowerSpectrum.rational(), TemporalModel(), scenario,
                           n_years, lmax, seed)
    return globe_from_panel(panel, first_year, step_deg, climatology)
