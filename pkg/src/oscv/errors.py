"""Exception hierarchy shared by all modules."""


class OSCVError(Exception):
    """Base class for every error raised by the package."""


class KernelParameterError(OSCVError, ValueError):
    """Invalid kernel parameters (e.g. a non-positive scale)."""


class DegenerateKernelError(OSCVError, ArithmeticError):
    """The one-sided transform of a kernel has a vanishing normaliser."""


class NumericError(OSCVError, ArithmeticError):
    """A quadrature rule failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NotFoundError(OSCVError, LookupError):
    """A root, crossing or threshold does not exist in the searched range."""


class NoMinimumError(OSCVError):
    """A criterion curve has no defined value to minimise."""


class SpecError(OSCVError, ValueError):
    """An asymptotic specification lacks a field the requested mode needs."""


class IngestionError(OSCVError, ValueError):
    """A CSV file could not be turned into a usable dataset."""


class DomainError(OSCVError, ValueError):
    """An argument lies outside the domain of a regression function."""
