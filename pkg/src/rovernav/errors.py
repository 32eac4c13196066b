"""Exception hierarchy and process exit codes.

Every error raised by the library derives from RovernavError so the CLI can
map failures onto stable exit codes: configuration problems exit with 2,
malformed or inconsistent input data with 3, numerical failures with 4.
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class RovernavError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigurationError(RovernavError):
    """Invalid configuration: bad dimensions, unknown method, bad parameter."""

    exit_code = EXIT_CONFIG


class DataError(RovernavError):
    """Malformed input data: unparseable CSV, missing column, bad timestamps."""

    exit_code = EXIT_DATA


class NumericalError(RovernavError):
    """Numerical failure, e.g. a covariance that is not positive definite.

    Carries the condition number of the offending matrix when available so
    the failure can be diagnosed from the message alone.
    """

    exit_code = EXIT_NUMERICAL

    def __init__(self, message, condition_number=None):
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3e})"
        super().__init__(message)
        self.condition_number = condition_number


class EvaluationError(RovernavError):
    """Estimate and truth cannot be compared, e.g. disjoint time spans."""

    exit_code = EXIT_DATA
