"""Exception types raised across the package."""


class EulerChaosError(Exception):
    """Base class for all package errors."""


class DomainError(EulerChaosError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResolutionError(DomainError):
    """The evaluation grid is too coarse for the sieve limit."""


class UsageError(EulerChaosError):
    """Bad configuration or invocation (maps to CLI exit code 2)."""
