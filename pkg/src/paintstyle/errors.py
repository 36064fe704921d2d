"""Exception hierarchy shared by every stage of the package."""


class PaintStyleError(Exception):
    """Base class for all errors raised by :mod:`paintstyle`."""


class InputError(PaintStyleError, ValueError):
    """Raised when an argument falls outside the domain an operation accepts."""


class ShapeError(InputError):
    """Raised when array shapes or level counts do not line up."""


class DomainError(InputError):
    """Raised for numerically invalid parameters (zero variance, off-simplex vectors...)."""


class ConfigError(PaintStyleError):
    """Raised for invalid or inconsistent run configuration."""


class PipelineError(PaintStyleError):
    """Raised when stage files are missing, stale, or fail header validation."""
