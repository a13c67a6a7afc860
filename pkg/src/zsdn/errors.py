"""Exception hierarchy.

``ValidationError`` covers everything a caller could have checked before the
call (bad shapes, bad config values); ``RuntimeFailure`` covers failures that
only show up while running (diverged training, unreadable files). The CLI
maps the two branches to distinct exit codes.
"""


class ZsdnError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ZsdnError, ValueError):
    """Invalid argument or configuration value."""


class DivisibilityError(ValidationError):
    """An image axis is not divisible by the required factor."""


class ShapeMismatchError(ValidationError):
    """Two arrays that must share a shape do not."""


class OutOfBoundsError(ValidationError):
    """A requested window falls outside the image."""


class NegativeIntensityError(ValidationError):
    """Negative intensity where a nonnegative shot-noise rate is required."""


class EmptyMaskError(ValidationError):
    """A mask selects zero pixels, so a mean over it is undefined."""


class RuntimeFailure(ZsdnError, RuntimeError):
    """Failure that occurs while running a valid request."""


class DivergenceError(RuntimeFailure):
    """Training loss became non-finite or exceeded the abort threshold."""


class FormatError(RuntimeFailure):
    """Unsupported or malformed image/checkpoint file."""
