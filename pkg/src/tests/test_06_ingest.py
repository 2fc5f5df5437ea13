"""
Lat-lon ingestion: CSV reading, anomalies, annual means, regridding and the pipeline.
"""

import numpy as np
import pytest


FIXTURE_CSV = """year,month,lat,lon,value
2000,1,-60.0,0.0,1.0
2000,1,-20.0,0.0,2.0
2000,1,20.0,0.0,3.0
2000,1,60.0,0.0,4.0
2000,2,-60.0,0.0,5.0
2000,2,-20.0,0.0,6.0
2000,2,20.0,0.0,7.0
2000,2,60.0,0.0,8.0
"""


def _write(tmp_path, text, name="input.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _single_cell(values_by_time):
    from spherical_cusum.ingest import LatLonSeries

    times = list(values_by_time)
    values = np.array([values_by_time[t] for t in times], dtype=float).reshape(len(times), 1, 1)
    return LatLonSeries([10.0], [0.0], times, values)


# ---------------------------------------------------------------------------
# CSV reading
# ---------------------------------------------------------------------------

class TestReadLatLonCsv:
    """read_latlon_csv validation."""

    def test_fixture_cube(self, tmp_path):
        """2 months x 4 latitudes x 1 longitude gives 8 values in order."""
        from spherical_cusum.ingest import read_latlon_csv

        series = read_latlon_csv(_write(tmp_path, FIXTURE_CSV))
        assert series.values.shape == (2, 4, 1)
        assert series.times == [(2000, 1), (2000, 2)]
        np.testing.assert_array_equal(series.values.ravel(), np.arange(1.0, 9.0))

    def test_rows_in_any_order(self, tmp_path):
        """Shuffled rows give the same cube."""
        from spherical_cusum.ingest import read_latlon_csv

        header, *rows = FIXTURE_CSV.strip().splitlines()
        shuffled = "\n".join([header] + rows[::-1]) + "\n"
        np.testing.assert_array_equal(read_latlon_csv(_write(tmp_path, shuffled)).values,
                                      read_latlon_csv(_write(tmp_path, FIXTURE_CSV, "b.csv")).values)

    def test_missing_cell_is_named(self, tmp_path):
        """Without a fill policy the first gap is reported with its coordinates."""
        from spherical_cusum.errors import SchemaError
        from spherical_cusum.ingest import read_latlon_csv

        text = FIXTURE_CSV.replace("2000,2,20.0,0.0,7.0\n", "")
        with pytest.raises(SchemaError, match=r"time=2000-02, lat=20, lon=0"):
            read_latlon_csv(_write(tmp_path, text))

    def test_nearest_fill(self, tmp_path):
        """fill='nearest' copies the closest valid cell of the same month."""
        from spherical_cusum.ingest import read_latlon_csv

        text = FIXTURE_CSV.replace("2000,2,60.0,0.0,8.0\n", "")
        series = read_latlon_csv(_write(tmp_path, text), fill="nearest")
        assert series.values[1, 3, 0] == 7.0

    @pytest.mark.parametrize(
        "text, message",
        [
            ("year,month,lat,value\n2000,1,0.0,1.0\n", "missing CSV columns: lon"),
            (FIXTURE_CSV + "2000,1,-60.0,0.0,9.0\n", "duplicate cell"),
            (FIXTURE_CSV.replace("2000,2,60.0", "2000,13,60.0"), "month"),
            (FIXTURE_CSV.replace("60.0,0.0,4.0", "95.0,0.0,4.0"), "latitudes"),
            (FIXTURE_CSV.replace("20.0,0.0,3.0", "30.0,0.0,3.0").replace("20.0,0.0,7.0", "30.0,0.0,7.0"),
             "irregular latitude"),
            ("year,month,lat,lon,value\n", "no data rows"),
        ],
    )
    def test_schema_violations(self, tmp_path, text, message):
        """Header, value and grid violations raise SchemaError."""
        from spherical_cusum.errors import SchemaError
        from spherical_cusum.ingest import read_latlon_csv

        with pytest.raises(SchemaError, match=message):
            read_latlon_csv(_write(tmp_path, text))

    def test_unknown_fill_policy(self, tmp_path):
        """Only None and 'nearest' are accepted."""
        from spherical_cusum.errors import PreconditionError
        from spherical_cusum.ingest import read_latlon_csv

        with pytest.raises(PreconditionError):
            read_latlon_csv(_write(tmp_path, FIXTURE_CSV), fill="linear")

    def test_write_then_read(self, tmp_path):
        """write_latlon_csv produces a file read_latlon_csv accepts unchanged."""
        from spherical_cusum.ingest import make_synthetic_globe, read_latlon_csv, write_latlon_csv

        series = make_synthetic_globe(2000, 2001, step_deg=30.0, lmax=2, seed=3)
        write_latlon_csv(series, tmp_path / "globe.csv")
        again = read_latlon_csv(tmp_path / "globe.csv")
        assert again.times == series.times
        assert np.array_equal(again.values, series.values)


# ---------------------------------------------------------------------------
# Anomalies and annual means
# ---------------------------------------------------------------------------

def _three_years():
    values = {(year, month): 0.0 for year in (2000, 2001, 2002) for month in range(1, 13)}
    values.update({(2000, 1): 1.0, (2001, 1): 2.0, (2002, 1): 3.0})
    return _single_cell(values)


class TestAnomalies:
    """compute_anomalies and annual_average."""

    def test_january_anomalies(self):
        """January values 1, 2, 3 over a 3-year base give -1, 0, 1."""
        from spherical_cusum.ingest import compute_anomalies

        anomalies = compute_anomalies(_three_years(), 2000, 2002)
        january = anomalies.months == 1
        np.testing.assert_allclose(anomalies.values[january].ravel(), [-1.0, 0.0, 1.0])
        assert anomalies.base == (2000, 2002)
        assert anomalies.frequency == "monthly"

    def test_idempotent(self):
        """Anomalies of anomalies over the same base are unchanged."""
        from spherical_cusum.ingest import compute_anomalies, make_synthetic_globe

        series = make_synthetic_globe(2000, 2004, step_deg=30.0, lmax=3, seed=1)
        once = compute_anomalies(series, 2000, 2004)
        twice = compute_anomalies(once, 2000, 2004)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-12)

    def test_base_not_covered(self):
        """Every month of the base period must be present."""
        from spherical_cusum.errors import PreconditionError
        from spherical_cusum.ingest import compute_anomalies

        with pytest.raises(PreconditionError, match="first 2003-01"):
            compute_anomalies(_three_years(), 2000, 2003)

    def test_annual_mean(self):
        """Months valued 1..12 average to 6.5."""
        from spherical_cusum.ingest import AnomalySeries, annual_average

        monthly = AnomalySeries([0.0], [0.0], [(2010, m) for m in range(1, 13)],
                                np.arange(1.0, 13.0).reshape(12, 1, 1))
        annual = annual_average(monthly)
        assert annual.times == [(2010, 0)]
        assert annual.frequency == "annual"
        assert annual.values[0, 0, 0] == pytest.approx(6.5)

    def test_partial_year_dropped(self):
        """An incomplete year is dropped and described in warnings."""
        from spherical_cusum.ingest import AnomalySeries, annual_average

        times = [(2010, m) for m in range(1, 13)] + [(2011, 1), (2011, 2)]
        monthly = AnomalySeries([0.0], [0.0], times, np.zeros((14, 1, 1)))
        annual = annual_average(monthly)
        assert annual.years.tolist() == [2010]
        assert annual.warnings == [
            {"event_type": "partial_year_dropped", "year": 2011, "months_present": [1, 2]}
        ]

    def test_no_complete_year(self):
        """Nothing left after dropping is an error."""
        from spherical_cusum.errors import PreconditionError
        from spherical_cusum.ingest import AnomalySeries, annual_average

        monthly = AnomalySeries([0.0], [0.0], [(2010, 1)], np.zeros((1, 1, 1)))
        with pytest.raises(PreconditionError):
            annual_average(monthly)


# ---------------------------------------------------------------------------
# Regridding
# ---------------------------------------------------------------------------

class TestRegrid:
    """regrid_to_cubature on known fields."""

    def test_cosine_of_colatitude(self):
        """sin(lat) on a 2.5 degree grid interpolates to cos(theta) within 1e-3."""
        from spherical_cusum.harmonics import build_gauss_grid
        from spherical_cusum.ingest import LatLonSeries, latlon_axes, regrid_to_cubature

        lats, lons = latlon_axes(2.5)
        field = np.sin(np.radians(lats))[:, None] * np.ones(lons.size)
        grid = build_gauss_grid(16)
        snapshot = regrid_to_cubature(LatLonSeries(lats, lons, [(2000, 1)], field[None]), grid)
        values = snapshot.samples[:, 0]
        np.testing.assert_allclose(values, np.cos(grid.theta), atol=1e-3)
        meridian = values.reshape(grid.n_theta, grid.n_phi)[:, 0]
        assert np.all(np.diff(meridian) < 0)

    def test_band_limited_field(self, tmp_path):
        """Coefficients of an ell <= 8 field survive 2.5 degree sampling within 0.5%."""
        from spherical_cusum.fields import AngularPowerSpectrum, MeanScenario, TemporalModel, simulate_panel
        from spherical_cusum.harmonics import analyze, build_gauss_grid
        from spherical_cusum.ingest import globe_from_panel, regrid_to_cubature

        panel = simulate_panel(AngularPowerSpectrum.power_law(4.0), TemporalModel(), MeanScenario(),
                               2, 8, seed=17)
        series = globe_from_panel(panel, 2000, step_deg=2.5, climatology=False)
        recovered = analyze(regrid_to_cubature(series, build_gauss_grid(16)), 8)
        for t, month_index in ((0, 0), (1, 12)):
            truth = panel.values[:, t]
            error = np.linalg.norm(recovered.values[:, month_index] - truth) / np.linalg.norm(truth)
            assert error <= 5e-3

    def test_partial_longitudes_rejected(self):
        """Longitudes must wrap the whole circle."""
        from spherical_cusum.errors import PreconditionError
        from spherical_cusum.harmonics import build_gauss_grid
        from spherical_cusum.ingest import LatLonSeries, regrid_to_cubature

        series = LatLonSeries([-45.0, 45.0], [0.0, 90.0, 180.0], [(2000, 1)], np.zeros((1, 2, 3)))
        with pytest.raises(PreconditionError, match="full circle"):
            regrid_to_cubature(series, build_gauss_grid(4))


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def _trend_globe(trend_scale, first_year=2001, n_years=3):
    from spherical_cusum.harmonics import CoefficientPanel, coefficient_index
    from spherical_cusum.ingest import globe_from_panel

    panel = CoefficientPanel.zeros(8, n_years)
    panel.values[coefficient_index(2, 0)] = trend_scale * np.arange(1, n_years + 1)
    return globe_from_panel(panel, first_year, step_deg=2.5, climatology=True)


class TestPipeline:
    """run_pipeline end to end on synthetic globes."""

    def test_zonal_trend_recovered(self, tmp_path):
        """A Y_20 trend stays in a_20; every other coefficient is below 1e-3 of its peak."""
        from spherical_cusum.harmonics import coefficient_index
        from spherical_cusum.ingest import run_pipeline, write_latlon_csv

        write_latlon_csv(_trend_globe(1.0), tmp_path / "trend.csv")
        result = run_pipeline(tmp_path / "trend.csv", base=(2001, 2003), lmax=8, lstar=16)
        row = coefficient_index(2, 0)
        series = result.panel.values[row]
        np.testing.assert_allclose(series, [-1.0, 0.0, 1.0], atol=2e-3)
        others = np.delete(result.panel.values, row, axis=0)
        assert np.abs(others).max() <= 1e-3 * np.abs(series).max()
        assert result.warnings == []

    def test_constant_field_gives_zero_panel(self, tmp_path):
        """Climatology alone is removed completely."""
        from spherical_cusum.ingest import pipeline, write_latlon_csv

        write_latlon_csv(_trend_globe(0.0), tmp_path / "flat.csv")
        panel = pipeline(tmp_path / "flat.csv", base=(2001, 2003), lmax=8, lstar=16)
        np.testing.assert_allclose(panel.values, 0.0, atol=1e-10)

    def test_partial_year_reported(self, tmp_path):
        """Dropped years show up as pipeline warnings."""
        from spherical_cusum.ingest import LatLonSeries, make_synthetic_globe, run_pipeline, write_latlon_csv

        full = make_synthetic_globe(2000, 2003, step_deg=30.0, lmax=2, seed=5)
        keep = len(full.times) - 6
        cut = LatLonSeries(full.lats, full.lons, full.times[:keep], full.values[:keep])
        write_latlon_csv(cut, tmp_path / "cut.csv")
        result = run_pipeline(tmp_path / "cut.csv", base=(2000, 2002), lmax=2, lstar=4)
        assert result.panel.n_times == 3
        assert result.warnings[0]["year"] == 2003

    def test_lmax_above_lstar(self, tmp_path):
        """lmax must not exceed the cubature order."""
        from spherical_cusum.errors import PreconditionError
        from spherical_cusum.ingest import run_pipeline

        with pytest.raises(PreconditionError, match="lstar"):
            run_pipeline(tmp_path / "unused.csv", base=(2000, 2001), lmax=10, lstar=8)

    def test_synthetic_globe_layout(self):
        """Default synthetic globe: 40 years, 5 degree pole-to-pole grid."""
        from spherical_cusum.ingest import latlon_axes, make_synthetic_globe

        globe = make_synthetic_globe()
        assert globe.values.shape == (480, 37, 72)
        assert globe.times[0] == (1981, 1) and globe.times[-1] == (2020, 12)
        lats, lons = latlon_axes(2.5)
        assert (lats.size, lons.size) == (73, 144)
