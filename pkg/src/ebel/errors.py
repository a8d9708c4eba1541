"""Exception hierarchy shared across the package."""


class EBELError(Exception):
    """Base class for all errors raised by :mod:`ebel`."""


class HullViolation(EBELError):
    """The origin is not in the interior of the convex hull of the EL points."""


class NonConvergence(EBELError):
    """The Newton iteration did not reach the gradient tolerance.

    The best iterate is attached as ``solution`` when available.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ProfileNonConvergence(EBELError):
    """The outer profile search over the constraint manifold failed."""


class DomainError(EBELError, ValueError):
    pass


class DimensionMismatch(EBELError, ValueError):
    pass


class BlockLengthError(EBELError, ValueError):
    pass


class DegenerateSample(EBELError, ValueError):
    """The sample is (numerically) constant, so no spread is available."""


class NonCausal(EBELError, ValueError):
    """AR polynomial has a root on or inside the unit circle."""
