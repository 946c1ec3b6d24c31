"""Exception hierarchy shared by the library and the CLI."""

from typing import Optional


class LinearizationError(Exception):
    """Base class for every error raised by linearml"""
    exit_code = 1

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# Usage / configuration problems (exit 1)

class ConfigError(LinearizationError):
    exit_code = 1


class ConfigInvalid(ConfigError):
    pass


class KTooLarge(ConfigError):
    pass


class EmptyGrid(ConfigError):
    pass


# Bad or missing data (exit 2)

class DataError(LinearizationError):
    exit_code = 2


class MalformedLine(DataError):
    pass


class NonAscendingIndex(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class LabelArityMismatch(DataError):
    pass


class InvalidLabel(DataError):
    pass


class DatasetNotFound(DataError):
    pass


class InvalidRange(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptyNeighbors(DataError):
    pass


class UnsupportedModelVersion(DataError):
    pass


class MalformedModel(DataError):
    pass


# Numerical failures (exit 3)

class NumericError(LinearizationError):
    exit_code = 3


class SingularSystem(NumericError):
    pass


class NonFiniteLoss(NumericError):
    pass
