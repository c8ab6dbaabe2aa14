"""Exception hierarchy shared across the package."""


class InsFemError(Exception):
    """Base class for all package errors."""


class InvalidArgument(InsFemError, ValueError):
    pass


class UnsupportedElement(InsFemError, ValueError):
    pass


class UnsupportedDegree(InsFemError, ValueError):
    pass


class InvertedElement(InsFemError, ArithmeticError):
    pass


class IncompatibleOrder(InsFemError, ValueError):
    pass


class InvalidGeometry(InsFemError, ValueError):
    pass


class ConfigurationError(InsFemError):
    pass


class SingularMatrix(InsFemError, ArithmeticError):
    pass


class ZeroPivot(SingularMatrix):
    pass


class StepFailed(InsFemError):
    """A nonlinear solve inside a timestep did not converge."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TimestepTooSmall(InsFemError):
    pass


class NoConvergence(InsFemError):
    pass


class EvaluationError(InsFemError, ArithmeticError):
    pass


class ParseError(InsFemError):
    """Input-file or expression syntax error carrying a source location."""

    def __init__(self, message, line=None, column=None, filename=None):
        self.message = message
        self.line = line
        self.column = column
        self.filename = filename
        super().__init__(self._format())

    def _format(self):
        loc = ""
        if self.filename is not None:
            loc += f"{self.filename}:"
        if self.line is not None:
            loc += f"{self.line}:"
            if self.column is not None:
                loc += f"{self.column}:"
        return f"{loc} {self.message}" if loc else self.message
