"""
Experiment configuration.

An experiment is described by a flat mapping, read from JSON (default) or
YAML (.yaml / .yml) files:

    hypothesis: h1          # h0 | h1
    model: 2                # mean scenario 1, 2 or 3
    alpha: 0.5              # trend exponent, h1 only
    n_times: 300
    lmax: 30
    lmin: 0
    grid: 300
    replicates: 200
    seed: 11
    quantiles: ../quantiles/reference.json   # path, inline table or "reference"
    temporal: {kind: ar1, phi: 0.3}          # optional
    spectrum: {kind: rational, c0: 1.0}         # optional
    workers: 4                               # optional
    sups_csv: sups.csv                       # optional

Relative paths are resolved against the directory of the config file.
There is no environment-variable configuration.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from spherical_cusum.errors import ConfigError, PreconditionError
from spherical_cusum.fields import (
    AngularPowerSpectrum,
    MeanScenario,
    TemporalModel,
    scenario_preset,
)
from spherical_cusum.pillowcase import QuantileTable

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("hypothesis", "model", "n_times", "lmax", "replicates", "seed")
OPTIONAL_KEYS = ("alpha", "lmin", "grid", "quantiles", "temporal", "spectrum",
                 "workers", "sups_csv")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one rejection-frequency experiment."""

    hypothesis: str
    model: int
    n_times: int
    lmax: int
    replicates: int
    seed: int
    alpha: float = 0.0
    lmin: int = 0
    grid: int = 300
    quantiles: QuantileTable = field(default_factory=QuantileTable.reference)
    temporal: TemporalModel = field(default_factory=TemporalModel)
    spectrum: AngularPowerSpectrum = field(default_factory=AngularPowerSpectrum.rational)
    workers: int | None = None
    sups_csv: str | None = None

    def __post_init__(self):
        if self.hypothesis not in ("h0", "h1"):
            raise PreconditionError(f"hypothesis must be 'h0' or 'h1', got {self.hypothesis!r}")
        if self.model not in (1, 2, 3):
            raise PreconditionError(f"model must be 1, 2 or 3, got {self.model!r}")
        if self.alpha < 0:
            raise PreconditionError(f"alpha must be >= 0, got {self.alpha}")
        if self.replicates < 1:
            raise PreconditionError(f"replicates must be >= 1, got {self.replicates}")
        if self.n_times < 2:
            raise PreconditionError(f"n_times must be >= 2, got {self.n_times}")
        if self.lmax < 1:
            raise PreconditionError(f"lmax must be >= 1, got {self.lmax}")
        if not 0 <= self.lmin <= self.lmax:
            raise PreconditionError(f"lmin must lie in 0..lmax={self.lmax}, got {self.lmin}")
        if self.grid < 1:
            raise PreconditionError(f"grid must be >= 1, got {self.grid}")
        if self.workers is not None and self.workers < 1:
            raise PreconditionError(f"workers must be >= 1, got {self.workers}")

    # -- Construction ---------------------------------------------------------

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: Path | None = None,
                     source: str | None = None) -> ExperimentConfig:
        """
        Build a config from a parsed mapping.

        Raises:
            ConfigError: On missing or unknown keys, or invalid values.
        """
        if not isinstance(data, Mapping):
            raise ConfigError("experiment configuration must be a mapping", path=source)
        missing = [key for key in REQUIRED_KEYS if key not in data]
        if missing:
            raise ConfigError(
                f"Missing required experiment configuration: {', '.join(missing)}",
                path=source,
            )
        unknown = sorted(set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
        if unknown:
            raise ConfigError(f"Unknown experiment configuration keys: {', '.join(unknown)}",
                              path=source)

        values = dict(data)
        try:
            values["hypothesis"] = str(values["hypothesis"]).lower()
            for key in ("model", "n_times", "lmax", "replicates", "seed", "lmin", "grid"):
                if key in values:
                    values[key] = _as_int(key, values[key])
            if "alpha" in values:
                values["alpha"] = float(values["alpha"])
            if values.get("workers") is not None:
                values["workers"] = _as_int("workers", values["workers"])
            values["quantiles"] = _load_quantiles(values.get("quantiles"), base_dir)
            if "temporal" in values:
                values["temporal"] = TemporalModel.from_dict(values["temporal"])
            if "spectrum" in values:
                values["spectrum"] = AngularPowerSpectrum.from_dict(values["spectrum"])
            if values.get("sups_csv") is not None and base_dir is not None:
                values["sups_csv"] = str(base_dir / values["sups_csv"])
            return cls(**values)
        except (PreconditionError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), path=source) from exc

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        """Load a JSON or YAML experiment file."""
        path = Path(path)
        data = load_mapping(path)
        return cls.from_mapping(data, base_dir=path.parent, source=str(path))

    # -- Derived values ---------------------------------------------------------

    def scenario(self) -> MeanScenario:
        return scenario_preset(
            self.model, time_varying=self.hypothesis == "h1",
            alpha=self.alpha, lmax=self.lmax,
        )

    def with_n_times(self, n_times: int) -> ExperimentConfig:
        return replace(self, n_times=n_times)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["quantiles"] = self.quantiles.to_dict()
        out["temporal"] = self.temporal.to_dict()
        out["spectrum"] = self.spectrum.to_dict()
        return out


# ---------------------------------------------------------------------------
# File parsing
# ---------------------------------------------------------------------------

def _as_int(key: str, value: Any) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def load_mapping(path: Path) -> Any:
    """
    Parse a JSON or YAML file, reporting the error location on failure.

    Raises:
        ConfigError: If the file cannot be read or parsed.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", path=str(path)) from exc

    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            problem = getattr(exc, "problem", None) or str(exc)
            raise ConfigError(
                f"invalid YAML: {problem}", path=str(path),
                line=mark.line + 1 if mark else None,
                column=mark.column + 1 if mark else None,
            ) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", path=str(path),
                          line=exc.lineno, column=exc.colno) from exc


def load_quantile_table(path: str | Path) -> QuantileTable:
    """Read a QuantileTable JSON file."""
    path = Path(path)
    data = load_mapping(path)
    if not isinstance(data, Mapping):
        raise ConfigError("quantile table must be a JSON object", path=str(path))
    try:
        return QuantileTable.from_dict(data)
    except PreconditionError as exc:
        raise ConfigError(str(exc), path=str(path)) from exc


def _load_quantiles(value: Any, base_dir: Path | None) -> QuantileTable:
    if value is None or value == "reference":
        return QuantileTable.reference()
    if isinstance(value, Mapping):
        return QuantileTable.from_dict(value)
    if isinstance(value, str):
        path = Path(value)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return load_quantile_table(path)
    raise ConfigError(f"quantiles must be a path, a mapping or 'reference', got {value!r}")
