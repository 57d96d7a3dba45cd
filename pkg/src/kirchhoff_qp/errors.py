"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`KirchhoffError` so callers can catch the whole family at once.
"""


class KirchhoffError(Exception):
    """Base class for all package errors."""


class MeanNotZero(KirchhoffError, ValueError):
    """An inverse derivative was requested for a function with nonzero mean."""


class SmallDivisorUnderflow(KirchhoffError, ArithmeticError):
    """A Fourier divisor fell below the floating-point floor."""


class DomainError(KirchhoffError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonPositiveArgument(DomainError):
    """A quantity that must be positive (e.g. ``1 + a``) is not."""


class NoConvergence(KirchhoffError, RuntimeError):
    """A fixed-point or iterative procedure failed to converge."""


class Singular(KirchhoffError, ArithmeticError):
    """A matrix is singular or numerically ill-conditioned."""


class StepFailed(KirchhoffError, RuntimeError):
    """A Newton-type step could not be completed."""


class BadParameter(KirchhoffError, ValueError):
    """The parameter value is outside the admissible (non-resonant) set."""


class ConfigError(KirchhoffError, ValueError):
    """Invalid configuration (missing key, inconsistent exponents, ...)."""
