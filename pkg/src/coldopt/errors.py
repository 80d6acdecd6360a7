"""Exception hierarchy shared by every coldopt module."""


class ColdOptError(Exception):
    """Base class for all coldopt errors."""


class DomainError(ColdOptError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class SingularFitError(DomainError):
    """The regression design matrix is rank deficient."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"design matrix is rank deficient in column {column!r}")


class ScenarioError(ColdOptError):
    """A scenario file violates the schema."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where += f" [key {key}"
            where += f", line {line}]" if line is not None else "]"
        super().__init__(message + where)


class NumericalError(ColdOptError, ArithmeticError):
    """An iterative numerical routine failed to converge or produced garbage."""
