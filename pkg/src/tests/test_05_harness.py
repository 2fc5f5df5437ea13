"""
Experiment drivers: rejection frequencies, power curves, scans and covariance checks.

Replicate counts here are small; the calibrated frequency checks live in
test_09_acceptance.py and are marked slow.
"""

import numpy as np
import pytest


def _config(**overrides):
    from spherical_cusum.config import ExperimentConfig

    values = dict(hypothesis="h0", model=1, n_times=30, lmax=5, replicates=20,
                  seed=1, grid=30, workers=1)
    values.update(overrides)
    return ExperimentConfig(**values)


class TestRejectionExperiment:
    """run_rejection_experiment and power_curve."""

    def test_table_layout(self):
        """Frequencies, binomial errors and per-replicate sups."""
        from spherical_cusum.harness import run_rejection_experiment

        table = run_rejection_experiment(_config())
        assert table.levels == [0.9, 0.95, 0.99]
        assert table.replicates == 20
        assert table.sups.shape == (20,)
        for p, se in zip(table.frequencies, table.standard_errors):
            assert 0.0 <= p <= 1.0
            assert se == pytest.approx(np.sqrt(p * (1 - p) / 20))
        assert table.frequencies == sorted(table.frequencies, reverse=True)
        payload = table.to_dict()
        assert payload["config"]["n_times"] == 30
        assert set(payload) == {"config", "levels", "frequencies", "standard_errors", "wall_time"}

    def test_single_replicate(self):
        """B=1 gives 0/1 outcomes."""
        from spherical_cusum.harness import run_rejection_experiment

        table = run_rejection_experiment(_config(replicates=1))
        assert all(p in (0.0, 1.0) for p in table.frequencies)

    def test_independent_of_workers(self):
        """Replicate b uses substream (seed, b) whichever process runs it."""
        from spherical_cusum.harness import run_rejection_experiment

        inline = run_rejection_experiment(_config(replicates=12), workers=1)
        pooled = run_rejection_experiment(_config(replicates=12), workers=3)
        np.testing.assert_array_equal(inline.sups, pooled.sups)
        assert inline.frequencies == pooled.frequencies

    def test_static_mean_does_not_matter(self):
        """Under H0 the static mean of any model is removed by centering."""
        from spherical_cusum.harness import run_rejection_experiment

        model1 = run_rejection_experiment(_config(model=1, replicates=8))
        model3 = run_rejection_experiment(_config(model=3, replicates=8))
        np.testing.assert_allclose(model1.sups, model3.sups, rtol=0, atol=1e-12)

    def test_monopole_trend_is_detected(self):
        """A linear monopole trend with L=1 is rejected at every level."""
        from spherical_cusum.harness import run_rejection_experiment

        table = run_rejection_experiment(
            _config(hypothesis="h1", model=1, alpha=1.0, n_times=100, lmax=1, replicates=10)
        )
        assert table.frequencies == [1.0, 1.0, 1.0]

    def test_failing_replicate_aborts(self):
        """A degenerate replicate raises ReplicateError with its index."""
        from spherical_cusum.errors import ReplicateError
        from spherical_cusum.fields import AngularPowerSpectrum
        from spherical_cusum.harness import run_rejection_experiment

        with pytest.raises(ReplicateError) as excinfo:
            run_rejection_experiment(_config(spectrum=AngularPowerSpectrum.zero()))
        assert excinfo.value.replicate == 0
        assert "degenerate multipole" in str(excinfo.value)

    def test_power_curve(self):
        """One table per N, each recording its own N."""
        from spherical_cusum.harness import power_curve

        tables = power_curve(_config(replicates=4), [10, 20, 40])
        assert [t.config["n_times"] for t in tables] == [10, 20, 40]


class TestMultiscaleScan:
    """multiscale_scan over summation starts."""

    def test_lmin_zero_matches_statistic(self, make_panel, reference_table):
        """The lmin=0 entry equals the sup of the full statistic."""
        from spherical_cusum.cusum import decide_all, statistic_from_panel
        from spherical_cusum.harness import multiscale_scan

        panel = make_panel(6, 40, seed=12)
        entries = multiscale_scan(panel, [0, 2, 4], 40, reference_table)
        _, sup = statistic_from_panel(panel, 0, 40)
        assert [e.lmin for e in entries] == [0, 2, 4]
        assert entries[0].sup == sup
        assert entries[0].reject == {level: d.reject for level, d in decide_all(sup, reference_table).items()}

    def test_degenerate_entry_continues(self, make_panel, reference_table):
        """A failing lmin is reported and later entries still run."""
        from spherical_cusum.harness import multiscale_scan

        panel = make_panel(4, 20, seed=13)
        panel.values[4:9] = 1.0
        entries = multiscale_scan(panel, [3, 1, 4], 20, reference_table)
        assert entries[0].sup is not None
        assert entries[1].sup is None and "ell=2" in entries[1].error
        assert entries[2].sup is not None and entries[2].error is None
        assert entries[1].to_dict()["reject"] == {}

    def test_invalid_lists(self, make_panel, reference_table):
        """Empty lists and lmin beyond lmax are refused."""
        from spherical_cusum.errors import PreconditionError
        from spherical_cusum.harness import multiscale_scan

        panel = make_panel(5, 10)
        with pytest.raises(PreconditionError, match="empty"):
            multiscale_scan(panel, [], 10, reference_table)
        with pytest.raises(PreconditionError, match=r"\[8\]"):
            multiscale_scan(panel, [0, 8], 10, reference_table)


class TestCovarianceCheck:
    """covariance_check against the pillowcase covariance."""

    def test_pairs(self):
        """A(r, 1) is identically zero; interior pairs are near their targets."""
        from spherical_cusum.harness import covariance_check

        entries = covariance_check(
            _config(n_times=60, lmax=10, lmin=1, replicates=300),
            [((0.5, 1.0), (0.5, 1.0)), ((0.5, 0.5), (1.0, 0.5)), ((1.0, 0.5), (1.0, 0.25))],
        )
        boundary, interior, across = entries
        assert boundary.empirical_cov == 0.0 and boundary.target == 0.0 and boundary.z_score == 0.0
        assert interior.target == pytest.approx(0.125)
        assert across.target == pytest.approx(0.125)
        assert abs(interior.z_score) < 4.0
        assert abs(across.z_score) < 4.0
        assert interior.to_dict()["pair"] == [[0.5, 0.5], [1.0, 0.5]]

    def test_requires_null(self):
        """H1 configurations are refused."""
        from spherical_cusum.errors import PreconditionError
        from spherical_cusum.harness import covariance_check

        with pytest.raises(PreconditionError, match="H0"):
            covariance_check(_config(hypothesis="h1", alpha=0.5), [((1.0, 0.5), (1.0, 0.5))])
