"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary argument validation; the classes
here mark failure modes a caller may want to handle specifically.
"""


class PhotonMemError(Exception):
    """Base class for package-specific errors."""


class DegenerateInputError(PhotonMemError, ValueError):
    """Input collapsed to something with no usable content (e.g. zero norm)."""


class NumericFailureError(PhotonMemError, ArithmeticError):
    """A numerical routine produced non-finite state."""


class FitFailureError(PhotonMemError, RuntimeError):
    """An estimator could not produce a meaningful fit."""


class InsufficientDataError(PhotonMemError, ValueError):
    """Not enough samples/events for the requested estimate."""


class UnstableEstimateError(PhotonMemError, RuntimeError):
    """Resampling diagnostics indicate the estimate cannot be trusted."""


class UndefinedCorrelationError(PhotonMemError, ValueError):
    """Correlation functional is undefined for the given state (e.g. vacuum)."""
