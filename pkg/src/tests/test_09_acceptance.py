"""
Monte Carlo acceptance runs.

These reproduce calibrated rejection frequencies and take minutes; run
them with `pytest -m slow`. Each run is recorded through the session
test logger (logs/summary.md collects the rejection tables).
"""

import json

import numpy as np
import pytest

pytestmark = pytest.mark.slow


def _config(**overrides):
    from spherical_cusum.config import ExperimentConfig

    values = dict(hypothesis="h0", model=1, n_times=100, lmax=30, replicates=300, seed=2024)
    values.update(overrides)
    return ExperimentConfig(**values)


def _record(test_logger, name, config, table):
    test_logger.log_experiment(name, {k: v for k, v in config.to_dict().items()
                                      if k not in ("quantiles", "sups_csv")})
    test_logger.log_rejection_table(name, table)


class TestNullCalibration:
    """Type I error under H0."""

    def test_model_one_size(self, test_logger):
        """
        Model 1, N=100, L=30, B=2000: frequencies near 0.064 / 0.033 / 0.0055.

        The acceptance widths are 3 standard errors of a 300-replicate run
        (0.042 / 0.031 / 0.013). The seed is fixed at 2024 and is not tuned;
        2000 replicates keep the Monte Carlo error well inside the widths.
        """
        from spherical_cusum.harness import run_rejection_experiment

        test_logger.log_test_start("h0_model1_size", "Type I error at N=100, L=30, B=2000")
        config = _config(replicates=2000)
        table = run_rejection_experiment(config)
        _record(test_logger, "h0_model1", config, table)

        targets = [0.064, 0.033, 0.0055]
        ok = True
        for level, p, target in zip(table.levels, table.frequencies, targets):
            bound = 3 * np.sqrt(target * (1 - target) / 300)
            passed = abs(p - target) <= bound
            ok &= passed
            test_logger.log_assertion(f"size at {level:g}", f"{target} +/- {bound:.4f}", f"{p:.4f}", passed)
        test_logger.log_test_end("h0_model1_size", "passed" if ok else "failed")
        assert ok


class TestPower:
    """Rejection frequencies under a trending mean."""

    def test_linear_trend(self, test_logger):
        """Model 2, alpha=1, N=100, B=200: every replicate rejects."""
        from spherical_cusum.harness import run_rejection_experiment

        test_logger.log_test_start("h1_model2_alpha1", "power with a linear trend")
        config = _config(hypothesis="h1", model=2, alpha=1.0, replicates=200)
        table = run_rejection_experiment(config)
        _record(test_logger, "h1_model2_alpha1", config, table)
        passed = table.frequencies == [1.0, 1.0, 1.0]
        test_logger.log_assertion("power", [1.0, 1.0, 1.0], table.frequencies, passed)
        test_logger.log_test_end("h1_model2_alpha1", "passed" if passed else "failed")
        assert passed

    def test_power_grows_with_n(self, test_logger):
        """Model 2, alpha=0.5: power at 0.95 is nondecreasing in N and near 1 at N=500."""
        from spherical_cusum.harness import power_curve

        test_logger.log_test_start("h1_model2_alpha05_curve", "power curve over N")
        config = _config(hypothesis="h1", model=2, alpha=0.5, replicates=200)
        tables = power_curve(config, [100, 300, 500])
        powers = []
        for n, table in zip([100, 300, 500], tables):
            _record(test_logger, f"h1_model2_alpha05_N{n}", config.with_n_times(n), table)
            powers.append(table.frequencies[table.levels.index(0.95)])

        slack = 3 * np.sqrt(0.01 * 0.99 / config.replicates)
        monotone = all(b >= a - slack for a, b in zip(powers, powers[1:]))
        high = powers[-1] >= 0.99 - slack
        test_logger.log_assertion("nondecreasing power", "monotone", powers, monotone)
        test_logger.log_assertion("power at N=500", f">= {0.99 - slack:.3f}", powers[-1], high)
        test_logger.log_test_end("h1_model2_alpha05_curve", "passed" if monotone and high else "failed")
        assert monotone and high


class TestIngestedGlobe:
    """Synthetic temperature globe through ingest and scan."""

    def test_trend_detected_at_low_lmin(self, tmp_path, test_logger):
        """A trending globe is rejected at 0.95 for lmin 0, 1 and 2."""
        from spherical_cusum.cli import main
        from spherical_cusum.ingest import make_synthetic_globe, write_latlon_csv

        test_logger.log_test_start("ingest_scan", "synthetic globe 1981-2020 through ingest and scan")
        globe = make_synthetic_globe(1981, 2020, step_deg=5.0, lmax=8, model=2, alpha=1.0, seed=7)
        write_latlon_csv(globe, tmp_path / "globe.csv")
        assert main(["ingest", "--input", str(tmp_path / "globe.csv"), "--lmax", "8",
                     "--lstar", "16", "--out", str(tmp_path / "panel.bpanel")]) == 0
        assert main(["scan", "--panel", str(tmp_path / "panel.bpanel"), "--lmin-list", "0,1,2",
                     "--out", str(tmp_path / "scan.json")]) == 0

        entries = json.loads((tmp_path / "scan.json").read_text())["entries"]
        flags = [entry["reject"]["0.95"] for entry in entries]
        passed = flags == [True, True, True]
        test_logger.log_assertion("reject at 0.95", [True, True, True], flags, passed,
                                  details=", ".join(f"lmin {e['lmin']}: sup {e['sup']:.3f}" for e in entries))
        test_logger.log_test_end("ingest_scan", "passed" if passed else "failed")
        assert passed


class TestCovarianceLimit:
    """Empirical covariance of the centred field against the pillowcase limit."""

    def test_pillowcase_covariance(self, test_logger):
        """Model 1, N=200, L=50, B=2000, lmin=1: covariances within 0.03 of 0.25 and 0.125."""
        from spherical_cusum.harness import covariance_check

        test_logger.log_test_start("h0_covariance", "pillowcase covariance at N=200, L=50, B=2000")
        config = _config(n_times=200, lmax=50, replicates=2000, lmin=1)
        pairs = [((1.0, 0.5), (1.0, 0.5)), ((0.5, 0.5), (1.0, 0.5))]
        entries = covariance_check(config, pairs)

        ok = True
        for entry, expected in zip(entries, [0.25, 0.125]):
            passed = (abs(entry.target - expected) <= 1e-12
                      and abs(entry.empirical_cov - expected) <= 0.03)
            ok &= passed
            test_logger.log_assertion(f"cov {entry.pair}", f"{expected} +/- 0.03",
                                      f"{entry.empirical_cov:.4f}", passed,
                                      details=f"z={entry.z_score:.2f}")
        test_logger.log_test_end("h0_covariance", "passed" if ok else "failed")
        assert ok
