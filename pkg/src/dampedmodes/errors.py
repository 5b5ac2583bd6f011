"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when an input violates an operation's preconditions."""


class DegenerateInput(ValueError):
    """Raised when an input is well-formed but carries no usable signal
    (e.g. the zero trajectory handed to a decay fit)."""


class IntegrationFailure(RuntimeError):
    """Raised when a time integration cannot continue.

    The samples produced before the failure are attached as ``partial``
    (a :class:`~dampedmodes.spectral.Trajectory` or ``None``).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class QuadratureFailure(RuntimeError):
    """Raised when an oscillatory quadrature misses its tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class NeedsDenserSampling(ValueError):
    """Raised when samples are too coarse to unwrap a phase unambiguously."""
