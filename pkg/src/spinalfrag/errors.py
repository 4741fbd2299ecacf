"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI uses when it escapes.
"""


class SpinalError(Exception):
    exit_code = 2


class ValidationError(SpinalError, ValueError):
    """Malformed input: overlapping blocks, bad labels, out-of-range indices."""


class DomainError(SpinalError, ValueError):
    """Parameters outside the region where a formula is defined."""


class CapacityError(SpinalError):
    """An enumeration or table would exceed its configured cap."""

    exit_code = 3


class NumericError(SpinalError, ArithmeticError):
    exit_code = 3


class KernelInconsistencyError(NumericError):
    """A Levy kernel produced split probabilities that cannot be a law."""
