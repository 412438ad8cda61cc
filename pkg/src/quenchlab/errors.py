"""Exception and warning classes raised across quenchlab."""


class QuenchLabError(Exception):
    """Base class for every error raised by the package."""


class ChainError(QuenchLabError, ValueError):
    """A chain specification failed validation."""


class DimensionMismatch(ChainError):
    pass


class NegativeEntry(ChainError):
    pass


class NonStochasticRow(ChainError):
    pass


class UncenteredObservable(ChainError):
    pass


class NoStationaryLaw(ChainError):
    """No unique invariant law could be computed and none was supplied."""


class InvalidStationary(ChainError):
    """A supplied stationary vector is not an invariant probability vector."""


class ChainLoadError(QuenchLabError):
    """A chain file could not be read or parsed."""


class GuardExceeded(QuenchLabError, ValueError):
    """A requested grid or horizon is above the desk-scale limit."""


class TooLarge(GuardExceeded):
    """Exhaustive path enumeration would exceed the path-count guard."""


class BadManifest(QuenchLabError, ValueError):
    pass


class NumericalInconsistency(QuenchLabError, ArithmeticError):
    """Two independent routes to the same quantity disagree."""


class OracleUnavailable(UserWarning):
    """The Poisson-equation variance oracle cannot be formed for this chain."""


class DegenerateMismatch(UserWarning):
    """Samples are spread out although the reference law is a point mass."""
