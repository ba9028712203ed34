"""Exception hierarchy for the waring package."""


class WaringError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(WaringError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(DomainError):
    """A parameter object was constructed with invalid values."""


class DimensionMismatchError(DomainError):
    """Vector lengths or grid shapes do not agree."""


class HeterogeneousGridError(DomainError):
    """A collection of count fields does not share one grid."""


class ConvergenceError(WaringError, ArithmeticError):
    """A series or iteration does not converge."""


class IterationLimitError(ConvergenceError):
    """An iteration hit its configured cap before meeting its tolerance."""


class QuantileOverflowError(IterationLimitError):
    """The quantile search ran past its cap (heavy tail, extreme level)."""


class InfiniteMomentError(WaringError, ArithmeticError):
    """The requested moment is infinite for the given parameters."""


class UsageError(WaringError):
    """The command line could not be parsed."""


class InsufficientSampleError(DomainError):
    """Too few observations for the requested estimator."""
