"""Exception types raised across the package."""


class MeanFieldError(Exception):
    """Base class for all package errors."""


class NotHermitian(MeanFieldError, ValueError):
    pass


class NotPositive(MeanFieldError, ValueError):
    pass


class DegenerateLength(MeanFieldError, ValueError):
    pass


class StepFailure(MeanFieldError, ArithmeticError):
    pass


class NoStationaryState(MeanFieldError, ValueError):
    pass


class SizeExceeded(MeanFieldError, ValueError):
    pass


class NotExchangeSymmetric(MeanFieldError, ValueError):
    pass


class ConfigError(MeanFieldError, ValueError):
    pass


class PipelineFailure(MeanFieldError, RuntimeError):
    """Numerical failure inside a pipeline stage; ``module`` names the stage."""

    def __init__(self, module: str, cause: BaseException):
        super().__init__(f"{module}: {type(cause).__name__}: {cause}")
        self.module = module
        self.cause = cause
