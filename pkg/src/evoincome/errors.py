"""Exception and warning classes shared across the package."""


class EvoIncomeError(Exception):
    """Base class for all errors raised by evoincome."""


class DomainError(EvoIncomeError, ValueError):
    """An argument lies outside the domain on which an operation is defined."""


class SingularityError(DomainError):
    """Evaluation at a point where a density has a singularity."""


class DegenerateCostError(DomainError):
    """A cost curve without an interior unit-cost minimum."""


class EmptyMarketError(EvoIncomeError, ValueError):
    """Aggregates were requested for a market with zero total sales."""


class NumericOverflowError(EvoIncomeError, ArithmeticError):
    """A simulation step produced a non-finite value."""


class NonNormalizableError(EvoIncomeError, ValueError):
    """A stationary density cannot be normalized on the requested support."""


class NoStationaryDistributionError(EvoIncomeError, ValueError):
    """The requested regime has no stationary distribution."""


class InvalidParamsError(EvoIncomeError, ValueError):
    """Parameter set violates its invariants (weights, positivity, ...)."""


class InfeasibleError(EvoIncomeError, ValueError):
    """A constraint cannot be satisfied (e.g. mean outside the bin range)."""


class InsufficientTailError(EvoIncomeError, ValueError):
    """Too few order statistics for a tail estimate."""


class InvalidCDFError(EvoIncomeError, ValueError):
    """A callable passed as a CDF is not monotone or leaves [0, 1]."""


class ConfigError(EvoIncomeError, ValueError):
    """Malformed or unknown configuration keys."""


class SlowRelaxationWarning(UserWarning):
    """Relaxation toward market equilibrium is slow (few available units)."""


class NonNormalizableWarning(UserWarning):
    """A parameter choice implies a law that cannot be normalized."""


class ParameterConsistencyWarning(UserWarning):
    """Redundant parameters disagree (e.g. mean wage vs noise/drift ratio)."""
