"""
Exception hierarchy for spherical-cusum.

Every error raised on purpose by the package derives from
SphericalCusumError. Precondition and schema errors also derive from
ValueError so callers that only know the builtin keep working.

The CLI maps UsageError and ConfigError to exit code 2; any other package
error that reaches it exits with 1.
"""

from __future__ import annotations


class SphericalCusumError(Exception):
    """Base class for all package errors."""


class PreconditionError(SphericalCusumError, ValueError):
    """An operation was called with arguments outside its domain."""


class DegenerateMultipoleError(PreconditionError):
    """The sample power spectrum vanishes at a multipole in the summation range."""

    def __init__(self, ell: int):
        self.ell = ell
        super().__init__(
            f"degenerate multipole: sample power spectrum is zero at ell={ell}. "
            "The coefficients at this multipole are constant in time."
        )

    def __reduce__(self):
        return (type(self), (self.ell,))


class DivergentSpectrumError(PreconditionError):
    """A spectral tail sum does not converge."""


class ScenarioError(PreconditionError):
    """A mean scenario violates the top-exponent condition."""


class SchemaError(SphericalCusumError, ValueError):
    """File content does not follow its documented layout."""


class ConfigError(SchemaError):
    """An experiment configuration file could not be loaded."""

    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        location = ""
        if path is not None:
            location = path
            if line is not None:
                location += f": line {line}"
                if column is not None:
                    location += f" column {column}"
            location += ": "
        self.message = message
        super().__init__(f"{location}{message}")

    def __reduce__(self):
        return (type(self), (self.message, self.path, self.line, self.column))


class ReplicateError(SphericalCusumError):
    """A Monte Carlo replicate failed; carries the replicate index."""

    def __init__(self, replicate: int, cause: Exception):
        self.replicate = replicate
        self.cause = cause
        super().__init__(f"replicate {replicate} failed: {cause}")

    def __reduce__(self):
        return (type(self), (self.replicate, self.cause))


class UsageError(SphericalCusumError):
    """Command-line flags are malformed or inconsistent."""
