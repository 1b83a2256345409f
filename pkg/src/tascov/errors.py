"""Exception types shared across the package."""


class TascovError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(TascovError):
    """A matrix required to be positive definite failed the Cholesky test."""


class DimensionMismatch(TascovError):
    """Operands do not share a common dimension."""


class DomainError(TascovError):
    """A scalar argument lies outside its valid domain."""


class EmptyInput(TascovError):
    """An input collection that must be non-empty was empty."""


class ConvergenceFailure(TascovError):
    """An iterative numerical routine failed to converge."""


class DegenerateInput(TascovError):
    """Input data are degenerate (e.g. a zero-variance variable)."""


class DegenerateDenominator(TascovError):
    """A loss denominator is zero so a relative score is undefined."""


class InsufficientSamples(TascovError):
    """Not enough samples for the requested split or estimate."""


class InconsistentTable(TascovError):
    """A posterior table does not match the target set or data it is used with."""


class ParseError(TascovError):
    """Input file could not be parsed; message carries row/column context."""
