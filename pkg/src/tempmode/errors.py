"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the command-line front
end never has to guess: 2 for usage problems, 3 for data/format problems and
4 for statistical-floor or regime failures.
"""

from __future__ import annotations


class TempModeError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3

    def details(self) -> dict:
        """Extra machine-readable fields for the JSON error line."""
        return {}


class UsageError(TempModeError, ValueError):
    exit_code = 2


class DomainError(TempModeError, ValueError):
    """A formula was evaluated outside its domain (e.g. n = 0)."""

    exit_code = 2


class DimensionError(TempModeError, ValueError):
    exit_code = 3


class DegenerateModeError(TempModeError, ValueError):
    """An all-zero (or numerically vanishing) mode function."""

    exit_code = 3


class FormatError(TempModeError, ValueError):
    """A file does not match its declared format."""

    exit_code = 3


class EigensolverError(TempModeError, RuntimeError):
    exit_code = 3


class ContaminationError(TempModeError, ValueError):
    """A spectrum expected to be vacuum carries photons."""

    exit_code = 3


class StatisticalFloorError(TempModeError):
    """The data cannot resolve the mode above the vacuum fluctuations."""

    exit_code = 4

    def __init__(self, message: str, verdict=None):
        super().__init__(message)
        self.verdict = verdict

    def details(self) -> dict:
        if self.verdict is None:
            return {}
        return {"verdict": self.verdict.to_dict()}


class UnsupportedMultimodeError(StatisticalFloorError):
    """More than two eigenvalues above the vacuum band."""
