"""Error variants raised by the spectral counting library."""


class SpectraError(Exception):
    """Base class for every library error. The CLI maps it to exit code 1."""


class DomainError(SpectraError):
    """An argument lies outside the domain of the operation."""


class NonPositiveInput(DomainError):
    """An evaluator received x <= 0."""


class BracketFailure(SpectraError):
    """No root bracket found for the inverse of h."""


class QuadratureNonConvergence(SpectraError):
    """Adaptive quadrature did not reach the requested accuracy."""


class NotDecreasing(SpectraError):
    """A summand that must be monotone decreasing increased."""


class BudgetExceeded(SpectraError):
    """The truncation point or term count passed its hard limit."""


class PoleAtOne(SpectraError):
    """zeta was requested too close to d = 1."""


class InexactTail(SpectraError):
    """An exact count was requested for a tail that is only asymptotic."""


class CountOverflow(SpectraError):
    """An integer count would leave the 64-bit range."""


class InverseFailure(SpectraError):
    """The diagonal intersection of the hyperbola split could not be bracketed."""


class RegimeError(SpectraError):
    """The requested formula has no statement for this dimension regime."""


class InfiniteMeasure(SpectraError):
    """The string has infinite measure, so its Minkowski content is undefined."""


class NoCrossover(SpectraError):
    """Every probe dimension diverged, or every one vanished."""
