"""
Shared pytest fixtures for spherical-cusum tests.

Provides:
- Random coefficient panels with a fixed seed
- The reference quantile table
- Test logger (narrative + structured logs under logs/)
"""

from pathlib import Path

import numpy as np
import pytest

# ---------------------------------------------------------------------------
# Path setup
# ---------------------------------------------------------------------------

# src/tests/conftest.py -> src/ -> project root
_TESTS_DIR = Path(__file__).parent
_SRC_DIR = _TESTS_DIR.parent
_PROJECT_ROOT = _SRC_DIR.parent

SCHEMA_DIR = _PROJECT_ROOT / "schemas"
EXPERIMENT_DIR = _SRC_DIR / "config" / "experiments"


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def mc_bound(samples: np.ndarray, sigmas: float = 3.0) -> float:
    """sigmas * standard error of the sample mean, from the observed sample."""
    samples = np.asarray(samples, dtype=float)
    return sigmas * samples.std(ddof=1) / np.sqrt(samples.size)


def validate_schema(payload, schema_name: str) -> None:
    """Validate a JSON payload against schemas/<schema_name>.json."""
    import json

    import jsonschema

    schema = json.loads((SCHEMA_DIR / f"{schema_name}.json").read_text(encoding="utf-8"))
    jsonschema.validate(payload, schema)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture
def make_panel():
    """Factory for panels with standard normal entries."""
    from spherical_cusum.harmonics import CoefficientPanel, n_coefficients

    def _make(lmax: int, n_times: int, seed: int = 0) -> CoefficientPanel:
        rng = np.random.default_rng(seed)
        return CoefficientPanel(lmax, n_times, rng.standard_normal((n_coefficients(lmax), n_times)))

    return _make


@pytest.fixture(scope="session")
def reference_table():
    from spherical_cusum.pillowcase import QuantileTable

    return QuantileTable.reference()


@pytest.fixture(scope="session")
def experiment_dir() -> Path:
    return EXPERIMENT_DIR


@pytest.fixture(scope="session")
def test_logger():
    """
    Session TestLogger for Monte Carlo tests.

    Logs are written to logs/ at the project root.
    """
    from .logger.test_logger import TestLogger

    logger = TestLogger(log_dir=str(_PROJECT_ROOT / "logs"))
    with logger:
        logger.log_session_start()
        yield logger
