"""Exception hierarchy shared by the library and the command line tool.

The CLI maps these onto process exit codes: bad or malformed input data is
exit code 2, a statistic that is mathematically undefined for the given data
is exit code 3, and anything that indicates a bug is exit code 4.
"""


class CovtestError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 4


class DataError(CovtestError):
    """Invalid input: malformed files, bad shapes, insufficient rows,
    incompatible option combinations."""

    exit_code = 2


class DegenerateStatisticError(CovtestError):
    """The requested statistic is undefined for this data (zero vectors,
    constant columns, non positive definite input under a Cholesky mapping)."""

    exit_code = 3


class InternalError(CovtestError):
    """A condition the construction should have made impossible."""

    exit_code = 4


class FeasibilityWarning(UserWarning):
    """The permutation space is small relative to the requested replicate
    count; sampling proceeds with replacement across replicates."""
