"""Exception taxonomy shared by the library and the CLI.

Input-side problems (bad values, malformed files) derive from ValueError;
numeric failures (non-convergence, divergence) derive from ArithmeticError.
The CLI maps the first family to exit code 2 and the second to exit code 3.
"""


class DegnnError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DegnnError, ValueError):
    """An argument or value is outside the documented domain."""


class ParseError(DegnnError, ValueError):
    """A file could not be parsed. Carries path and 1-based line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" ({loc})"
        super().__init__(f"{message}{loc}")


class NumericError(DegnnError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values."""


class TrainingError(NumericError):
    """Training diverged. Carries the last epoch with a finite loss."""

    def __init__(self, message, last_epoch=None):
        self.last_epoch = last_epoch
        super().__init__(message)
