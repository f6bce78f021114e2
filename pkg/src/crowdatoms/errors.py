"""Exception types shared across the pipeline.

The CLI maps these onto process exit codes: DataError -> 3, NumericError -> 4.
"""


class CrowdAtomsError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class DataError(CrowdAtomsError):
    """Malformed, inconsistent, or insufficient input data."""

    exit_code = 3


class NumericError(CrowdAtomsError):
    """Numerical failure: degenerate statistics or non-finite values."""

    exit_code = 4
