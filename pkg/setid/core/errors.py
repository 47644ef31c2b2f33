"""Setid exceptions.

Each exception also derives from the builtin that would otherwise be raised so
callers catching ``ValueError`` or ``ArithmeticError`` keep working.

"""


class SetidError(Exception):
    """Base class for all setid errors."""


class ParameterError(SetidError, ValueError):
    """Invalid argument passed to a sampler, model or set operation."""


class NumericError(SetidError, ArithmeticError):
    """Numerical failure: non-PSD covariance, singular matrix, no convergence."""


class DomainError(SetidError, ValueError):
    """Operation undefined for the input, e.g. an empty identified set."""


class StateError(SetidError, RuntimeError):
    """Object used before it is in a usable state."""


class ConfigError(SetidError, ValueError):
    """Experiment configuration could not be read."""


class CheckError(SetidError, AssertionError):
    """An invariant check of the selftest failed."""
