"""Exception hierarchy shared by all modules.

Each class carries the process exit code used by the command-line front end.
"""


class StefanControlError(Exception):
    exit_code = 1


class ConfigError(StefanControlError, ValueError):
    """Invalid configuration or inadmissible input data."""

    exit_code = 2


class DomainError(ConfigError):
    """A coordinate or interface position lies outside its admissible range."""


class NumericalError(StefanControlError, RuntimeError):
    """A numerical procedure broke down or failed to converge."""

    exit_code = 3


class DegenerateObservabilityError(NumericalError):
    pass


class IterationError(NumericalError):
    """Fixed-point iteration did not converge.

    ``history`` holds the residual sequence recorded before giving up.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class OptimizationError(NumericalError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class CorridorEscapeError(StefanControlError):
    """The interface left the admissible corridor."""

    exit_code = 4

    def __init__(self, message, time=None, iterate=None):
        super().__init__(message)
        self.time = time
        self.iterate = iterate
