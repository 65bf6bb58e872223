class PresbysimError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(PresbysimError, ValueError):
    pass


class DomainError(PresbysimError, ValueError):
    """A numeric argument is outside the domain of the operation."""


class CalibrationError(PresbysimError):
    pass


class TraceError(PresbysimError, ValueError):
    """A sensor trace failed to parse or validate.

    ``line`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
