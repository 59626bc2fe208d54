"""Exception hierarchy shared by all modules."""


class JiggleError(Exception):
    """Base class for library errors."""


class DomainError(JiggleError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidCombinationError(DomainError):
    """Mutually incompatible options, e.g. classical statistics at zero temperature."""


class ShortTimeSingularityError(DomainError):
    """The memory kernel was requested at or below the short-time guard."""


class GridError(DomainError):
    """A discretization grid is inconsistent with the requested evaluation."""


class ConvergenceError(JiggleError, ArithmeticError):
    """An adaptive procedure ran out of budget.

    Attributes
    ----------
    partial : object
        Best available result at the time of failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NearResonanceError(JiggleError, ArithmeticError):
    """The response denominator is numerically zero."""


class BandwidthError(JiggleError, ArithmeticError):
    """Spectral synthesis is under-resolved; increase the number of samples."""


class ContourResolutionError(JiggleError, ArithmeticError):
    """Phase increments along a contour could not be resolved."""


class ContourDegenerateError(JiggleError, ArithmeticError):
    """The function nearly vanishes on the contour even after a retry."""


class RunawayOverflowError(JiggleError, OverflowError):
    """Runaway growth overflows double precision.

    Attributes
    ----------
    timescale : float
        e-folding time of the runaway mode.
    """

    def __init__(self, message, timescale):
        super().__init__(message)
        self.timescale = timescale
