"""Exception types shared across the package."""


class LaaksoError(Exception):
    """Base class for all errors raised by laakso_lab."""


class DomainError(LaaksoError, ValueError):
    """An argument lies outside the domain of the operation."""


class RangeError(LaaksoError, IndexError):
    """A level or index exceeds what has been materialized."""


class ConstructionError(LaaksoError):
    """The combinatorial construction could not be completed."""


class GridError(LaaksoError, ValueError):
    """The grid step is not commensurate with the edge lengths."""


class ResolutionError(LaaksoError, ValueError):
    """A sampled representation is too coarse for the requested operation."""


class NumericError(LaaksoError, ArithmeticError):
    """A numerical routine failed to converge or produced a bad residual."""


class UsageError(LaaksoError):
    """Invalid request at the user-facing layer (unknown suite, bad flags)."""
