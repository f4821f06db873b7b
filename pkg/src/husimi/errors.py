"""Exception types raised by the toolkit.

Numerical-guard failures derive from :class:`GuardError`; the CLI maps them
to exit code 3. Input/config problems derive from :class:`ConfigError`
(exit code 2).
"""


class HusimiError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(HusimiError, ValueError):
    """Malformed input or configuration."""


class ParseError(ConfigError):
    """Text input could not be parsed; ``position`` is the 0-based offset."""

    def __init__(self, message, text="", position=None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} (at character {position})"
        super().__init__(message)


class GuardError(HusimiError):
    """A numerical guard rejected the request."""


class TruncationError(GuardError):
    """Fock-space truncation is too small for the requested object."""


class ScaleError(GuardError):
    """Dense dimension cap exceeded."""


class DomainError(GuardError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class ExtentError(GuardError):
    """Phase-space grid does not cover the distribution with enough margin."""


class MeasureError(GuardError):
    """Distribution is expressed in the wrong measure convention."""


class OrderingError(GuardError):
    """Operator is not in the ordering the operation requires."""


class UnsupportedError(GuardError):
    """Operation not available for this configuration."""


class SamplingError(GuardError):
    """Too few samples for a finite-difference estimate."""


class GeometryError(GuardError):
    """Pointer-region geometry violates a model invariant."""


class ConditioningError(GuardError):
    """Conditioning on an event of (numerically) zero probability."""


class GridExtentWarning(UserWarning):
    """The integration grid is smaller than recommended for the integrand."""
