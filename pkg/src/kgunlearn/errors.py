"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1 (usage),
DataError -> 2, NumericError -> 3.
"""


class KgUnlearnError(Exception):
    """Base class for all package errors."""


class ConfigError(KgUnlearnError):
    """Invalid configuration value or combination."""


class DataError(KgUnlearnError):
    """Invalid or inconsistent input data."""


class ParseError(DataError):
    """Malformed input file."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SamplingError(DataError):
    """A sampler has no legal candidate."""


class NumericError(KgUnlearnError):
    """Non-finite values encountered during optimization."""


class TrainingError(NumericError):
    """Training diverged."""

    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch
