"""
Angular power spectra, mean scenarios and coefficient-panel simulators.

A simulated panel is beta_{ell m}(t) = a_{ell m}(t) + mu_{ell m}(t), where the
a_{ell m}(.) are independent zero-mean Gaussian series with variance C_ell
(iid in time, or a stationary AR(1)) and mu follows a MeanScenario.

Usage:
    from spherical_cusum.fields import (
        AngularPowerSpectrum, TemporalModel, scenario_preset, simulate_panel,
    )

    panel = simulate_panel(
        AngularPowerSpectrum.rational(), TemporalModel(),
        scenario_preset(2, time_varying=True, alpha=0.5, lmax=30),
        n_times=300, lmax=30, seed=7,
    )
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special

from spherical_cusum.errors import DivergentSpectrumError, PreconditionError, ScenarioError
from spherical_cusum.harmonics import (
    CoefficientPanel,
    analyze,
    build_gauss_grid,
    coefficient_index,
    n_coefficients,
    synthesize,
)
from spherical_cusum.streams import substream

logger = logging.getLogger(__name__)

MAX_AR_COEFFICIENT = 0.95
SPECTRUM_KINDS = ("rational", "power", "table", "zero")


# ---------------------------------------------------------------------------
# Angular power spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngularPowerSpectrum:
    """
    Per-multipole variances C_ell.

    C_0 is always c0. For ell >= 1 the rule is one of:
        rational  2 / (ell (ell + 1))
        power     amplitude * ell**(-eta)
        table     table[ell - 1], zero beyond the table
        zero      0
    """

    kind: str = "rational"
    c0: float = 1.0
    eta: float | None = None
    amplitude: float = 1.0
    table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in SPECTRUM_KINDS:
            raise PreconditionError(
                f"unknown spectrum kind {self.kind!r}; expected one of {', '.join(SPECTRUM_KINDS)}"
            )
        if self.c0 < 0 or self.amplitude < 0:
            raise PreconditionError("spectrum variances must be non-negative")
        if self.kind == "power" and self.eta is None:
            raise PreconditionError("a power-law spectrum needs eta")
        if any(not math.isfinite(c) or c < 0 for c in self.table):
            raise PreconditionError("tabulated C_ell must be finite and non-negative")
        object.__setattr__(self, "table", tuple(float(c) for c in self.table))

    @classmethod
    def rational(cls, c0: float = 1.0) -> AngularPowerSpectrum:
        return cls(kind="rational", c0=c0)

    @classmethod
    def power_law(cls, eta: float, amplitude: float = 1.0, c0: float = 1.0) -> AngularPowerSpectrum:
        return cls(kind="power", c0=c0, eta=eta, amplitude=amplitude)

    @classmethod
    def tabulated(cls, values: Iterable[float], c0: float = 1.0) -> AngularPowerSpectrum:
        """Spectrum with C_ell = values[ell - 1] for ell >= 1 and zero beyond."""
        return cls(kind="table", c0=c0, table=tuple(values))

    @classmethod
    def zero(cls) -> AngularPowerSpectrum:
        return cls(kind="zero", c0=0.0)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AngularPowerSpectrum:
        data = dict(data)
        if "table" in data:
            data["table"] = tuple(data["table"])
        unknown = set(data) - {"kind", "c0", "eta", "amplitude", "table"}
        if unknown:
            raise PreconditionError(f"unknown spectrum keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "c0": self.c0}
        if self.kind == "power":
            out.update(eta=self.eta, amplitude=self.amplitude)
        if self.kind == "table":
            out["table"] = list(self.table)
        return out

    def cl(self, ell: int) -> float:
        """C_ell for a single multipole."""
        if ell < 0:
            raise PreconditionError(f"ell must be >= 0, got {ell}")
        if ell == 0:
            return float(self.c0)
        if self.kind == "rational":
            return 2.0 / (ell * (ell + 1))
        if self.kind == "power":
            return float(self.amplitude * ell ** (-self.eta))
        if self.kind == "table":
            return self.table[ell - 1] if ell <= len(self.table) else 0.0
        return 0.0

    def values(self, lmax: int) -> np.ndarray:
        """C_0..C_lmax as an array."""
        return np.array([self.cl(ell) for ell in range(lmax + 1)])

    def tail_sum(self, start: int, lcap: int = 10**6) -> tuple[float, bool]:
        """
        sum_{ell >= start} (2 ell + 1) C_ell.

        Closed forms are used for the built-in rules. Tails that do not
        converge are summed up to lcap.

        Returns:
            (value, converged). converged is False when the value is a
            truncated partial sum.

        Raises:
            DivergentSpectrumError: If the spectrum does not decay at all.
        """
        start = max(int(start), 1)
        if self.kind == "zero":
            return 0.0, True
        if self.kind == "table":
            ells = np.arange(start, len(self.table) + 1)
            if ells.size == 0:
                return 0.0, True
            c = np.asarray(self.table)[ells - 1]
            return float(np.sum((2 * ells + 1) * c)), True
        if self.kind == "rational":
            # (2l+1) * 2/(l(l+1)) = 2/l + 2/(l+1); harmonic series, diverges
            if lcap < start:
                return 0.0, False
            value = 2.0 * (special.psi(lcap + 1) - special.psi(start))
            value += 2.0 * (special.psi(lcap + 2) - special.psi(start + 1))
            return float(value), False

        eta = float(self.eta)
        if eta <= 0:
            raise DivergentSpectrumError(
                f"power-law spectrum with eta={eta} does not decay; tail diagnostic undefined"
            )
        if self.amplitude == 0:
            return 0.0, True
        if eta > 2:
            value = 2.0 * special.zeta(eta - 1.0, start) + special.zeta(eta, start)
            return float(self.amplitude * value), True
        ells = np.arange(start, lcap + 1, dtype=float)
        value = np.sum((2.0 * ells + 1.0) * ells ** (-eta))
        return float(self.amplitude * value), False


# ---------------------------------------------------------------------------
# Temporal dependence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TemporalModel:
    """
    Time dependence of the random coefficients.

    kind "iid" draws independent times; kind "ar1" uses a stationary AR(1)
    with lag-tau covariance C_ell * phi_ell**|tau|. phi is either one
    coefficient for every multipole or a mapping ell -> phi (missing
    multipoles default to 0).
    """

    kind: str = "iid"
    phi: float | Mapping[int, float] = 0.0

    def __post_init__(self):
        if self.kind not in ("iid", "ar1"):
            raise PreconditionError(f"temporal kind must be 'iid' or 'ar1', got {self.kind!r}")
        coefficients = self.phi.values() if isinstance(self.phi, Mapping) else [self.phi]
        for value in coefficients:
            if abs(value) > MAX_AR_COEFFICIENT:
                raise PreconditionError(
                    f"AR coefficient {value} exceeds the admissible bound {MAX_AR_COEFFICIENT}"
                )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TemporalModel:
        phi = data.get("phi", 0.0)
        if isinstance(phi, Mapping):
            phi = {int(k): float(v) for k, v in phi.items()}
        return cls(kind=data.get("kind", "iid"), phi=phi)

    def to_dict(self) -> dict[str, Any]:
        phi = {str(k): v for k, v in self.phi.items()} if isinstance(self.phi, Mapping) else self.phi
        return {"kind": self.kind, "phi": phi}

    def phi_at(self, ell: int) -> float:
        if self.kind == "iid":
            return 0.0
        if isinstance(self.phi, Mapping):
            return float(self.phi.get(ell, 0.0))
        return float(self.phi)

    def normalized_spectral_density(self, ell: int, lam: float | np.ndarray) -> float | np.ndarray:
        """f_ell(lambda) / C_ell = (1 - phi^2) / (2 pi (1 - 2 phi cos lambda + phi^2))."""
        phi = self.phi_at(ell)
        return (1.0 - phi * phi) / (2.0 * np.pi * (1.0 - 2.0 * phi * np.cos(lam) + phi * phi))

    def density_bounds(self, ell: int) -> tuple[float, float]:
        """Lower and upper bounds of the normalized spectral density over lambda."""
        a = abs(self.phi_at(ell))
        return (1.0 - a) / (2.0 * np.pi * (1.0 + a)), (1.0 + a) / (2.0 * np.pi * (1.0 - a))


# ---------------------------------------------------------------------------
# Mean scenarios
# ---------------------------------------------------------------------------

LM = tuple[int, int]


@dataclass(frozen=True)
class SecondaryTrend:
    """
    Remainder term c_{ell m} * t**(alpha_ell - epsilon) * (log t)**log_power.

    The value at t = 1 is taken as 0 whenever log_power != 0.
    """

    coefficients: Mapping[LM, float]
    epsilon: float
    log_power: float = 0.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ScenarioError(f"secondary trend epsilon must be > 0, got {self.epsilon}")

    def value(self, ell: int, m: int, t: float | np.ndarray, alpha: float) -> float | np.ndarray:
        c = self.coefficients.get((ell, m), 0.0)
        t = np.asarray(t, dtype=float)
        base = t ** (alpha - self.epsilon)
        if self.log_power != 0:
            logs = np.log(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(t > 1.0, np.abs(logs) ** self.log_power, 0.0)
            base = base * factor
        out = c * base
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MeanScenario:
    """
    mu_{ell m}(t) = mu0[ell, m] + mu1[ell, m] * t**alpha[ell] + mu2(ell, m, t).

    Maps are sparse; missing entries are zero and missing exponents are 0.
    Validated at construction: when the largest exponent alpha_bar is
    positive and mu1 is not empty, every multipole carrying alpha_bar must
    have a nonzero sum over m of its mu1 entries.
    """

    mu0: Mapping[LM, float] = field(default_factory=dict)
    mu1: Mapping[LM, float] = field(default_factory=dict)
    alpha: Mapping[int, float] = field(default_factory=dict)
    mu2: SecondaryTrend | None = None
    preset: Mapping[str, Any] | None = None

    def __post_init__(self):
        for name, mapping in (("mu0", self.mu0), ("mu1", self.mu1)):
            for (ell, m), value in mapping.items():
                if ell < 0 or abs(m) > ell:
                    raise ScenarioError(f"{name} entry ({ell}, {m}) is not a valid (ell, m) pair")
                if not math.isfinite(value):
                    raise ScenarioError(f"{name} entry ({ell}, {m}) is not finite")
        for ell, a in self.alpha.items():
            if a < 0:
                raise ScenarioError(f"alpha_{ell} must be >= 0, got {a}")
        self._check_top_exponent()

    def _check_top_exponent(self) -> None:
        if not any(v != 0 for v in self.mu1.values()):
            return
        ells = set(self.alpha) | {ell for ell, _ in self.mu1}
        alpha_bar = max(self.alpha_at(ell) for ell in ells)
        if alpha_bar <= 0:
            return
        for ell in sorted(ells):
            if self.alpha_at(ell) != alpha_bar:
                continue
            total = sum(v for (l, _), v in self.mu1.items() if l == ell)
            if total == 0:
                raise ScenarioError(
                    f"multipole ell={ell} carries the top exponent {alpha_bar} but its "
                    "mu1 coefficients sum to zero; the trend would be undetectable"
                )

    def alpha_at(self, ell: int) -> float:
        return float(self.alpha.get(ell, 0.0))

    def mean_array(self, lmax: int, n_times: int) -> np.ndarray:
        """mu_{ell m}(t) for ell <= lmax, t = 1..n_times, shape ((lmax+1)**2, n_times)."""
        out = np.zeros((n_coefficients(lmax), n_times))
        t = np.arange(1, n_times + 1, dtype=float)
        for (ell, m), value in self.mu0.items():
            if ell <= lmax:
                out[coefficient_index(ell, m)] += value
        for (ell, m), value in self.mu1.items():
            if ell <= lmax:
                out[coefficient_index(ell, m)] += value * t ** self.alpha_at(ell)
        if self.mu2 is not None:
            for (ell, m) in self.mu2.coefficients:
                if ell <= lmax:
                    out[coefficient_index(ell, m)] += self.mu2.value(ell, m, t, self.alpha_at(ell))
        return out

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "mu0": [[l, m, v] for (l, m), v in sorted(self.mu0.items())],
            "mu1": [[l, m, v] for (l, m), v in sorted(self.mu1.items())],
            "alpha": {str(l): a for l, a in sorted(self.alpha.items())},
        }
        if self.mu2 is not None:
            out["mu2"] = {
                "coefficients": [[l, m, v] for (l, m), v in sorted(self.mu2.coefficients.items())],
                "epsilon": self.mu2.epsilon,
                "log_power": self.mu2.log_power,
            }
        if self.preset is not None:
            out["preset"] = dict(self.preset)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> MeanScenario:
        def entries(rows):
            return {(int(l), int(m)): float(v) for l, m, v in rows or []}

        mu2 = None
        if data.get("mu2"):
            raw = data["mu2"]
            mu2 = SecondaryTrend(
                entries(raw["coefficients"]), float(raw["epsilon"]), float(raw.get("log_power", 0.0)),
            )
        return cls(
            mu0=entries(data.get("mu0")),
            mu1=entries(data.get("mu1")),
            alpha={int(l): float(a) for l, a in (data.get("alpha") or {}).items()},
            mu2=mu2,
            preset=data.get("preset"),
        )


def mean_at(scenario: MeanScenario, ell: int, m: int, t: int) -> float:
    """mu_{ell m}(t) = mu0 + mu1 * t**alpha_ell + mu2(t)."""
    if t < 1:
        raise PreconditionError(f"t must be >= 1, got {t}")
    value = scenario.mu0.get((ell, m), 0.0)
    value += scenario.mu1.get((ell, m), 0.0) * float(t) ** scenario.alpha_at(ell)
    if scenario.mu2 is not None:
        value += scenario.mu2.value(ell, m, float(t), scenario.alpha_at(ell))
    return float(value)


def scenario_preset(model_id: int, time_varying: bool = False, alpha: float = 0.0,
                    lmax: int = 30) -> MeanScenario:
    """
    Mean scenarios of the simulation designs.

    Model 1: mu_00 = 5. Model 2: also mu_{ell 0} = -2/(ell(ell+1)) for even
    ell in 2..lmax. Model 3: the same for every ell in 1..lmax. The monopole
    value is a coefficient, not a field value. Time-varying presets put the
    values in mu1 with exponent alpha on every multipole that carries one.

    Raises:
        PreconditionError: If model_id is not 1, 2 or 3.
    """
    if model_id not in (1, 2, 3):
        raise PreconditionError(f"model_id must be 1, 2 or 3, got {model_id!r}")
    values: dict[LM, float] = {(0, 0): 5.0}
    if model_id == 2:
        values.update({(ell, 0): -2.0 / (ell * (ell + 1)) for ell in range(2, lmax + 1, 2)})
    elif model_id == 3:
        values.update({(ell, 0): -2.0 / (ell * (ell + 1)) for ell in range(1, lmax + 1)})

    preset = {"model": model_id, "time_varying": bool(time_varying),
              "alpha": float(alpha) if time_varying else None}
    if not time_varying:
        return MeanScenario(mu0=values, preset=preset)
    return MeanScenario(
        mu1=values,
        alpha={ell: float(alpha) for ell, _ in values},
        preset=preset,
    )


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _row_variances(spectrum: AngularPowerSpectrum, lmax: int) -> np.ndarray:
    c = spectrum.values(lmax)
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        bad = int(np.flatnonzero(~np.isfinite(c) | (c < 0))[0])
        raise PreconditionError(f"C_ell is undefined or negative at ell={bad}")
    return np.repeat(c, 2 * np.arange(lmax + 1) + 1)


def simulate_panel(
    spectrum: AngularPowerSpectrum,
    temporal: TemporalModel,
    scenario: MeanScenario,
    n_times: int,
    lmax: int,
    seed: int,
    stream_key: tuple[int, ...] = (),
) -> CoefficientPanel:
    """
    Simulate beta_{ell m}(t) = a_{ell m}(t) + mu_{ell m}(t).

    The random part uses the substream (seed, *stream_key); identical
    arguments always give a bit-identical panel.

    Args:
        spectrum: Variances C_ell of a_{ell m}(t).
        temporal: iid or stationary AR(1) dependence in time.
        scenario: Mean function.
        n_times: Number of time points N (>= 2).
        lmax: Band limit L (>= 0).
        seed: Run seed.
        stream_key: Extra substream coordinates, e.g. (replicate,).

    Raises:
        PreconditionError: On N < 2, L < 0 or an invalid spectrum.
    """
    if n_times < 2:
        raise PreconditionError(f"n_times must be >= 2, got {n_times}")
    if lmax < 0:
        raise PreconditionError(f"lmax must be >= 0, got {lmax}")

    sd = np.sqrt(_row_variances(spectrum, lmax))
    rng = substream(seed, *stream_key)
    eps = rng.standard_normal((sd.size, n_times))

    if temporal.kind == "iid":
        noise = sd[:, None] * eps
    else:
        phi = np.repeat(
            [temporal.phi_at(ell) for ell in range(lmax + 1)], 2 * np.arange(lmax + 1) + 1
        )
        innovation = sd * np.sqrt(1.0 - phi * phi)
        noise = np.empty_like(eps)
        noise[:, 0] = sd * eps[:, 0]
        for t in range(1, n_times):
            noise[:, t] = phi * noise[:, t - 1] + innovation * eps[:, t]

    values = noise + scenario.mean_array(lmax, n_times)
    return CoefficientPanel(lmax, n_times, values, seed=seed, scenario=scenario.to_dict())


def simulate_pixelized_panel(
    spectrum: AngularPowerSpectrum,
    temporal: TemporalModel,
    scenario: MeanScenario,
    n_times: int,
    lmax: int,
    lstar: int,
    band_limit: int,
    seed: int,
    stream_key: tuple[int, ...] = (),
) -> CoefficientPanel:
    """
    Coefficients estimated from a sampled field, including pixelization error.

    The field is simulated up to band_limit (which may exceed lstar),
    sampled on the order-lstar Gauss grid and analyzed up to lmax.

    Raises:
        PreconditionError: If lmax > lstar or band_limit < lmax.
    """
    if lmax > lstar:
        raise PreconditionError(f"lmax={lmax} exceeds the grid order lstar={lstar}")
    if band_limit < lmax:
        raise PreconditionError(f"band_limit={band_limit} must be >= lmax={lmax}")
    full = simulate_panel(spectrum, temporal, scenario, n_times, band_limit, seed, stream_key)
    grid = build_gauss_grid(lstar)
    panel = analyze(synthesize(full, grid), lmax)
    panel.seed = seed
    panel.scenario = full.scenario
    return panel


def zonal_series(panel: CoefficientPanel, ells: Iterable[int]) -> dict[int, np.ndarray]:
    """beta_{ell 0}(1..N) for each requested ell."""
    out = {}
    for ell in ells:
        if not 0 <= ell <= panel.lmax:
            raise PreconditionError(f"ell={ell} outside panel with lmax={panel.lmax}")
        out[ell] = panel.series(ell, 0).copy()
    return out
