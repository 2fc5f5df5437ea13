"""
Real spherical harmonics, Gauss cubature grids and discrete transforms.

Conventions:
    - theta is colatitude in [0, pi] (theta=0 is the north pole), phi is
      longitude in [0, 2*pi).
    - Associated Legendre functions carry no Condon-Shortley phase.
    - Real harmonics use the three-branch form: sin(|m| phi) for m < 0,
      the zonal term for m = 0, cos(m phi) for m > 0.
    - Coefficient arrays are flat in (ell, m) with row index
      ell**2 + ell + m, and have one column per time index.

Usage:
    from spherical_cusum.harmonics import build_gauss_grid, analyze, synthesize

    grid = build_gauss_grid(16)
    field = synthesize(panel, grid)
    recovered = analyze(field, lmax=8)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from spherical_cusum.errors import DivergentSpectrumError, PreconditionError

if TYPE_CHECKING:
    from spherical_cusum.fields import AngularPowerSpectrum

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


def coefficient_index(ell: int, m: int) -> int:
    """Flat row index of (ell, m) in a coefficient array."""
    return ell * ell + ell + m


def n_coefficients(lmax: int) -> int:
    """Number of (ell, m) pairs with ell <= lmax."""
    return (lmax + 1) ** 2


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SphericalPoint:
    """A point on the unit sphere in colatitude/longitude."""

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise PreconditionError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2.0 * np.pi:
            raise PreconditionError(f"phi must lie in [0, 2*pi), got {self.phi}")


@dataclass(frozen=True, eq=False)
class CubatureGrid:
    """
    Nodes and positive weights on the sphere with a declared exactness order.

    Gauss grids also record their product layout (n_theta rows of n_phi
    longitudes, theta-major) so the harmonic matrix can be built from a
    Legendre table on the distinct colatitudes only.
    """

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    exactness_order: int
    n_theta: int | None = None
    n_phi: int | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if not (theta.shape == phi.shape == weights.shape) or theta.ndim != 1:
            raise PreconditionError(
                "theta, phi and weights must be one-dimensional arrays of equal length"
            )
        if self.exactness_order < 0:
            raise PreconditionError(
                f"exactness_order must be >= 0, got {self.exactness_order}"
            )
        if np.any(weights <= 0):
            raise PreconditionError("cubature weights must all be positive")
        if abs(weights.sum() - FOUR_PI) > 1e-9:
            raise PreconditionError(
                f"cubature weights must sum to 4*pi, got {weights.sum():.12f}"
            )
        if np.any((theta < 0) | (theta > np.pi)) or np.any((phi < 0) | (phi >= 2 * np.pi)):
            raise PreconditionError("grid nodes must satisfy 0<=theta<=pi, 0<=phi<2*pi")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "weights", weights)

    @property
    def n_points(self) -> int:
        return int(self.theta.size)

    @property
    def points(self) -> list[SphericalPoint]:
        return [SphericalPoint(float(t), float(p)) for t, p in zip(self.theta, self.phi)]


@dataclass(eq=False)
class CoefficientPanel:
    """
    Harmonic coefficients beta_{ell m}(t) for ell <= lmax and t = 1..n_times.

    values has shape ((lmax+1)**2, n_times); use coefficient_index to find
    the row of (ell, m). Time is 1-based in the accessors and 0-based in the
    array.
    """

    lmax: int
    n_times: int
    values: np.ndarray
    seed: int | None = None
    scenario: dict | None = field(default=None)

    def __post_init__(self):
        if self.lmax < 0:
            raise PreconditionError(f"lmax must be >= 0, got {self.lmax}")
        if self.n_times < 1:
            raise PreconditionError(f"n_times must be >= 1, got {self.n_times}")
        values = np.asarray(self.values, dtype=float)
        expected = (n_coefficients(self.lmax), self.n_times)
        if values.shape != expected:
            raise PreconditionError(
                f"panel values must have shape {expected}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise PreconditionError("panel values must all be finite")
        self.values = values

    @classmethod
    def zeros(cls, lmax: int, n_times: int) -> CoefficientPanel:
        return cls(lmax, n_times, np.zeros((n_coefficients(lmax), n_times)))

    def series(self, ell: int, m: int) -> np.ndarray:
        """Time series beta_{ell m}(1..N) as a view."""
        self._check_lm(ell, m)
        return self.values[coefficient_index(ell, m)]

    def get(self, ell: int, m: int, t: int) -> float:
        self._check_lm(ell, m)
        if not 1 <= t <= self.n_times:
            raise PreconditionError(f"t must lie in 1..{self.n_times}, got {t}")
        return float(self.values[coefficient_index(ell, m), t - 1])

    def multipole(self, ell: int) -> np.ndarray:
        """Rows for every m at one ell, shape (2*ell+1, n_times)."""
        self._check_lm(ell, 0)
        return self.values[ell * ell:(ell + 1) ** 2]

    def truncated(self, lmax: int) -> CoefficientPanel:
        """Copy restricted to ell <= lmax."""
        if not 0 <= lmax <= self.lmax:
            raise PreconditionError(f"cannot truncate lmax {self.lmax} panel to {lmax}")
        return CoefficientPanel(
            lmax, self.n_times, self.values[:n_coefficients(lmax)].copy(),
            seed=self.seed, scenario=self.scenario,
        )

    def _check_lm(self, ell: int, m: int) -> None:
        if not 0 <= ell <= self.lmax or abs(m) > ell:
            raise PreconditionError(
                f"(ell={ell}, m={m}) outside panel with lmax={self.lmax}"
            )


@dataclass(eq=False)
class FieldSnapshot:
    """Field samples on a cubature grid, shape (grid.n_points, n_times)."""

    grid: CubatureGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] != self.grid.n_points:
            raise PreconditionError(
                f"samples must have shape ({self.grid.n_points}, n_times), "
                f"got {samples.shape}"
            )
        self.samples = samples

    @property
    def n_times(self) -> int:
        return int(self.samples.shape[1])


# ---------------------------------------------------------------------------
# Legendre functions and harmonics
# ---------------------------------------------------------------------------

def normalized_legendre_table(lmax: int, u: np.ndarray) -> np.ndarray:
    """
    Fully normalized associated Legendre functions for every ell, m <= lmax.

    The returned p[ell, m, k] equals
    sqrt((2 ell + 1)/(4 pi) * (ell - m)!/(ell + m)!) * P_{ell m}(u_k), so that
    Y_{ell 0} = p[ell, 0] and the normalization never forms a factorial.

    Args:
        lmax: Highest degree.
        u: Points in [-1, 1].

    Returns:
        Array of shape (lmax+1, lmax+1, len(u)); entries with m > ell are zero.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(np.abs(u) > 1.0):
        raise PreconditionError("Legendre argument must satisfy |u| <= 1")
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    p = np.zeros((lmax + 1, lmax + 1, u.size))

    p[0, 0] = 1.0 / np.sqrt(FOUR_PI)
    for m in range(1, lmax + 1):
        p[m, m] = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * p[m - 1, m - 1]
    for m in range(0, lmax):
        p[m + 1, m] = np.sqrt(2.0 * m + 3.0) * u * p[m, m]
    for m in range(0, lmax + 1):
        for ell in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
            b = np.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
            p[ell, m] = a * (u * p[ell - 1, m] - b * p[ell - 2, m])
    return p


def _factorial_ratio(ell: int, m: int) -> float:
    """(ell + m)! / (ell - m)! as a float."""
    try:
        return float(math.perm(ell + m, 2 * m))
    except OverflowError:
        return math.exp(math.lgamma(ell + m + 1) - math.lgamma(ell - m + 1))


def assoc_legendre(ell: int, m: int, u: float) -> float:
    """
    Associated Legendre function P_{ell m}(u) without Condon-Shortley phase.

    Evaluated from the normalized recurrence and rescaled, so P_{ell 0}(1) = 1
    and P_{1 1}(u) = sqrt(1 - u**2).

    Raises:
        PreconditionError: If m < 0, m > ell or |u| > 1.
    """
    if ell < 0 or m < 0 or m > ell:
        raise PreconditionError(f"assoc_legendre requires 0 <= m <= ell, got ell={ell}, m={m}")
    if abs(u) > 1.0:
        raise PreconditionError(f"assoc_legendre requires |u| <= 1, got {u}")
    pbar = normalized_legendre_table(ell, np.array([u]))[ell, m, 0]
    scale = math.sqrt(FOUR_PI / (2 * ell + 1) * _factorial_ratio(ell, m))
    return float(pbar * scale)


def _assemble(p: np.ndarray, lmax: int, phi: np.ndarray, outer: bool) -> np.ndarray:
    """
    Combine a Legendre table with longitude factors into harmonic rows.

    With outer=True the table columns are distinct colatitudes and every
    longitude is paired with every colatitude (theta-major); otherwise
    columns of p and entries of phi are paired point by point.
    """
    n_points = p.shape[2] * phi.size if outer else phi.size
    y = np.empty((n_coefficients(lmax), n_points))
    root2 = np.sqrt(2.0)
    for m in range(lmax + 1):
        cos_m = np.cos(m * phi)
        sin_m = np.sin(m * phi)
        for ell in range(m, lmax + 1):
            plm = p[ell, m]
            if m == 0:
                row = np.repeat(plm, phi.size) if outer else plm
                y[coefficient_index(ell, 0)] = row
                continue
            if outer:
                y[coefficient_index(ell, m)] = root2 * np.outer(plm, cos_m).ravel()
                y[coefficient_index(ell, -m)] = root2 * np.outer(plm, sin_m).ravel()
            else:
                y[coefficient_index(ell, m)] = root2 * plm * cos_m
                y[coefficient_index(ell, -m)] = root2 * plm * sin_m
    return y


def real_harmonic_matrix(lmax: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """
    Evaluate every real harmonic with ell <= lmax at a set of points.

    Args:
        lmax: Highest degree.
        theta: Colatitudes (radians).
        phi: Longitudes (radians), same length as theta.

    Returns:
        Array of shape ((lmax+1)**2, len(theta)), row ell**2 + ell + m.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if theta.shape != phi.shape:
        raise PreconditionError("theta and phi must have the same shape")
    p = normalized_legendre_table(lmax, np.cos(theta))
    return _assemble(p, lmax, phi, outer=False)


def real_sph_harm(ell: int, m: int, point: SphericalPoint) -> float:
    """
    Real fully normalized spherical harmonic Y_{ell m} at one point.

    Raises:
        PreconditionError: If |m| > ell.
    """
    if ell < 0 or abs(m) > ell:
        raise PreconditionError(f"real_sph_harm requires |m| <= ell, got ell={ell}, m={m}")
    y = real_harmonic_matrix(ell, np.array([point.theta]), np.array([point.phi]))
    return float(y[coefficient_index(ell, m), 0])


# ---------------------------------------------------------------------------
# Cubature grids
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _gauss_nodes(lstar: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Colatitudes, Gauss weights and longitudes of the order-lstar grid."""
    x, w = np.polynomial.legendre.leggauss(lstar + 1)
    # north pole first
    x, w = x[::-1], w[::-1]
    n_phi = 2 * lstar + 2
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    theta = np.arccos(x)
    for arr in (theta, w, phi):
        arr.setflags(write=False)
    return theta, w, phi


def build_gauss_grid(lstar: int) -> CubatureGrid:
    """
    Gauss-Legendre nodes in cos(theta) times equispaced longitudes.

    n_theta = lstar + 1 and n_phi = 2*lstar + 2; the weight at (i, j) is
    w_i * 2*pi/n_phi. The grid integrates products of harmonics of degree
    <= lstar exactly.
    """
    if lstar < 0:
        raise PreconditionError(f"lstar must be >= 0, got {lstar}")
    theta_1d, w, phi_1d = _gauss_nodes(lstar)
    n_theta, n_phi = theta_1d.size, phi_1d.size
    return CubatureGrid(
        theta=np.repeat(theta_1d, n_phi),
        phi=np.tile(phi_1d, n_theta),
        weights=np.repeat(w * (2.0 * np.pi / n_phi), n_phi),
        exactness_order=lstar,
        n_theta=n_theta,
        n_phi=n_phi,
    )


@lru_cache(maxsize=2)
def _gauss_harmonics(lstar: int, lmax: int) -> np.ndarray:
    theta_1d, _, phi_1d = _gauss_nodes(lstar)
    p = normalized_legendre_table(lmax, np.cos(theta_1d))
    y = _assemble(p, lmax, phi_1d, outer=True)
    y.setflags(write=False)
    return y


def _is_gauss_grid(grid: CubatureGrid) -> bool:
    lstar = grid.exactness_order
    if grid.n_theta != lstar + 1 or grid.n_phi != 2 * lstar + 2:
        return False
    theta_1d, _, phi_1d = _gauss_nodes(lstar)
    return (grid.theta.size == theta_1d.size * phi_1d.size
            and np.allclose(grid.theta, np.repeat(theta_1d, phi_1d.size))
            and np.allclose(grid.phi, np.tile(phi_1d, theta_1d.size)))


def grid_harmonics(grid: CubatureGrid, lmax: int) -> np.ndarray:
    """Harmonic matrix ((lmax+1)**2, n_points) for the nodes of a grid."""
    if _is_gauss_grid(grid):
        return _gauss_harmonics(grid.exactness_order, lmax)
    return real_harmonic_matrix(lmax, grid.theta, grid.phi)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def analyze(field: FieldSnapshot, lmax: int) -> CoefficientPanel:
    """
    Discrete harmonic coefficients sum_k T(xi_k, t) Y_{ell m}(xi_k) lambda_k.

    Raises:
        PreconditionError: If lmax exceeds the grid's exactness order.
    """
    grid = field.grid
    if lmax < 0:
        raise PreconditionError(f"lmax must be >= 0, got {lmax}")
    if lmax > grid.exactness_order:
        raise PreconditionError(
            f"lmax={lmax} exceeds the grid exactness order {grid.exactness_order}; "
            "aliasing would be uncontrolled. Use a finer grid."
        )
    y = grid_harmonics(grid, lmax)
    values = y @ (field.samples * grid.weights[:, None])
    return CoefficientPanel(lmax, field.n_times, values)


def synthesize(panel: CoefficientPanel, grid: CubatureGrid) -> FieldSnapshot:
    """Evaluate sum_{ell, m} beta_{ell m}(t) Y_{ell m} at every grid node."""
    y = grid_harmonics(grid, panel.lmax)
    return FieldSnapshot(grid, y.T @ panel.values)


def synthesize_at(panel: CoefficientPanel, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Evaluate the panel's field at arbitrary points; shape (K, n_times)."""
    y = real_harmonic_matrix(panel.lmax, theta, phi)
    return y.T @ panel.values


def cubature_residual(grid: CubatureGrid, lmax: int) -> float:
    """
    Largest deviation of the discrete Gram matrix of Y_{ell m} from identity.

    Raises:
        PreconditionError: If lmax exceeds the grid's exactness order.
    """
    if lmax > grid.exactness_order:
        raise PreconditionError(
            f"lmax={lmax} exceeds the grid exactness order {grid.exactness_order}"
        )
    y = grid_harmonics(grid, lmax)
    gram = (y * grid.weights) @ y.T
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


# ---------------------------------------------------------------------------
# Pixelization diagnostics
# ---------------------------------------------------------------------------

def tail_regularity_diagnostic(
    spectrum: AngularPowerSpectrum,
    L: int,
    lstar: int,
    strong: bool = False,
    lcap: int = 10**6,
) -> float:
    """
    Relative power beyond the grid order: (1/C_L) * sum_{ell > lstar} (2 ell + 1) C_ell.

    A pixelization-error diagnostic with no pass/fail meaning. When the tail
    does not converge (spectra decaying like ell**-2 or slower) the sum is
    truncated at lcap and a warning is logged.

    Args:
        spectrum: Angular power spectrum.
        L: Analysis band limit.
        lstar: Grid exactness order, > L.
        strong: Multiply by L**2 (strong joint regularity).
        lcap: Truncation point for non-convergent tails.

    Raises:
        PreconditionError: If lstar <= L or C_L is zero.
        DivergentSpectrumError: If the spectrum does not decay.
    """
    if lstar <= L:
        raise PreconditionError(f"lstar must exceed L, got L={L}, lstar={lstar}")
    c_l = spectrum.cl(L)
    if c_l <= 0:
        raise PreconditionError(f"C_L must be positive at L={L} to normalize the tail")
    tail, converged = spectrum.tail_sum(lstar + 1, lcap)
    if not converged:
        logger.warning(
            "Spectral tail beyond lstar=%d does not converge; reporting the sum "
            "truncated at ell=%d", lstar, lcap,
        )
    ratio = tail / c_l
    if strong:
        ratio *= L * L
    return float(ratio)


def joint_regularity_exponent(eta: float, strong: bool = False, delta: float = 0.0) -> float:
    """
    Growth exponent zeta such that lstar ~ L**zeta keeps pixelization negligible.

    zeta = eta/(eta - 2) + delta for joint regularity and
    (eta + 2)/(eta - 2) + delta for strong joint regularity.
    """
    if eta <= 2.0:
        raise DivergentSpectrumError(
            f"joint regularity needs a spectral decay exponent eta > 2, got {eta}"
        )
    base = (eta + 2.0) / (eta - 2.0) if strong else eta / (eta - 2.0)
    return base + delta
