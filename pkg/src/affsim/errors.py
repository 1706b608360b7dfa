"""Exception hierarchy.

Exit-code mapping used by the CLI: ConfigError/UsageError -> 2,
PrecisionError/ResourceLimitError/NumericalError -> 3, statistical
check failures are not exceptions (they are reported) -> 1.
"""

from __future__ import annotations


class AffsimError(Exception):
    """Base class for all package errors."""


class ConfigError(AffsimError, ValueError):
    """Invalid configuration value (unsupported family, bad rank, ...)."""


class DomainError(AffsimError, ValueError):
    """Input outside the mathematical domain of an operation."""


class SingularInputError(DomainError):
    """A denominator is numerically zero; an alternative formula applies.

    The message names the alternative (e.g. the character-sum form of the
    theta series, which stays defined where the lattice form degenerates).
    """


class BoundaryError(DomainError):
    """Point too close to an alcove wall for a wall-sensitive operation."""


class ResourceLimitError(AffsimError):
    """An enumeration or allocation would exceed a configured cap."""


class PrecisionError(AffsimError):
    """A certified error target cannot be met within the truncation budget."""

    def __init__(self, message: str, achievable: float | None = None):
        super().__init__(message)
        self.achievable = achievable


class NumericalError(AffsimError):
    """Unexpected numerical failure (eigensolver breakdown, non-finite data)."""


class SamplingEfficiencyError(AffsimError):
    """Rejection sampling acceptance rate collapsed below the usable floor."""


class StepFailureError(AffsimError):
    """Adaptive SDE stepping underflowed its step floor at a wall."""


class DegenerateEstimateError(AffsimError):
    """A weighted estimator has no surviving mass (all paths absorbed)."""


class StatisticsError(AffsimError):
    """Degenerate input to a statistical test."""


class UsageError(AffsimError):
    """Command-line usage error."""
