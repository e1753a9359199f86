"""Exception and warning classes shared by all modules."""


class SvfApproxError(Exception):
    """Base class for errors raised by svfapprox."""


class UsageError(SvfApproxError, ValueError):
    """An argument violates a documented precondition."""


class DimensionError(UsageError):
    """Points or sets of different dimensions were mixed."""


class BoundViolation(SvfApproxError):
    """An error bound that must hold unconditionally was exceeded."""


class ChainTruncationWarning(UserWarning):
    """Metric chain enumeration stopped at the configured cap."""
