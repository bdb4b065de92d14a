"""Exception hierarchy. The CLI maps each family to an exit code."""


class EigtopoError(Exception):
    exit_code = 1
    code = "error"


class ConfigError(EigtopoError, ValueError):
    exit_code = 2
    code = "config_error"


class DataError(EigtopoError, ValueError):
    exit_code = 3
    code = "data_error"


class HeaderError(DataError):
    code = "bad_header"


class ChannelMismatchError(DataError):
    code = "channel_mismatch"


class NonFiniteError(DataError):
    code = "non_finite"


class EventError(DataError):
    code = "bad_event"


class NumericalError(EigtopoError, ArithmeticError):
    exit_code = 4
    code = "numerical_failure"


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap."""

    code = "no_convergence"

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations
