"""Exception types shared across the package."""


class GibbsLabError(Exception):
    """Base class for all package errors."""


class DomainError(GibbsLabError):
    """Arguments are structurally incompatible (windows, boundaries, coverage)."""


class SizeError(GibbsLabError):
    """An enumeration or solver cap would be exceeded."""


class RegimeError(GibbsLabError):
    """A bound was requested outside its regime of validity (e.g. c >= 1)."""


class ValidationError(GibbsLabError):
    """A user-supplied configuration or parameter failed validation."""
