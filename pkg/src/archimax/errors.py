"""Exception hierarchy; the CLI maps these onto process exit codes."""


class ArchimaxError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ArchimaxError):
    """Input data violates a documented precondition."""


class NumericError(ArchimaxError):
    """A numerical routine failed to converge or produced inconsistent values."""


class TrainingDivergenceError(NumericError):
    """Training loss became non-finite."""

    def __init__(self, message: str, loss_trace=None):
        super().__init__(message)
        self.loss_trace = list(loss_trace) if loss_trace is not None else []


class SamplerDegenerateError(NumericError):
    """Rejection sampler acceptance rate collapsed below a usable level."""


class ConfigError(ArchimaxError):
    """Malformed configuration file or inconsistent option combination."""
