# thermopepo/exceptions.py
from typing import Optional


class ThermoPepoError(Exception):
    """Base class for every error raised by the package."""
    exit_code = 2


class ConfigError(ThermoPepoError):
    """A run document could not be parsed or validated."""
    exit_code = 1

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class UsageError(ThermoPepoError):
    exit_code = 1


class TensorDimensionError(ThermoPepoError, ValueError):
    pass


class TensorArgumentError(ThermoPepoError, ValueError):
    pass


class NumericalError(ThermoPepoError, ArithmeticError):
    """Non-finite numbers showed up; `beta` tells where in an anneal it happened."""

    def __init__(self, message: str, beta: Optional[float] = None):
        self.beta = beta
        if beta is not None:
            message = f"{message} (beta={beta:.6g})"
        super().__init__(message)


class ModelError(ThermoPepoError, ValueError):
    pass


class EnvironmentDegenerateError(ThermoPepoError, ArithmeticError):

    def __init__(self, message: str, beta: Optional[float] = None):
        self.beta = beta
        if beta is not None:
            message = f"{message} (beta={beta:.6g})"
        super().__init__(message)


class OracleArgumentError(ThermoPepoError, ValueError):
    pass
