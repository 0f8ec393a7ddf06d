"""Exception types shared across the package.

The CLI maps each class onto an exit status (see ``mfsensor.cli``).
"""


class MFSensorError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MFSensorError, ValueError):
    """Arguments violate a documented precondition."""


class DegenerateInputError(InvalidInputError):
    """Input data carries no usable information (e.g. an all-zero snapshot matrix)."""


class DataFormatError(MFSensorError):
    """A file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NumericalBreakdownError(MFSensorError, ArithmeticError):
    """A matrix that must be SPD lost definiteness in floating point."""
