"""Exception types shared across the package."""

from __future__ import annotations


class XcovError(Exception):
    """Base class for errors raised by :mod:`xcov`."""


class DimensionError(XcovError, ValueError):
    """Matrix shapes are inconsistent with each other or with ``n <= p``."""


class EvaluationError(XcovError, ArithmeticError):
    """A spectral function hit a pole or a branch cut at the requested point."""


class PreconditionError(XcovError, ValueError):
    """An argument violates a documented precondition."""


class MatrixFormatError(XcovError, ValueError):
    """A matrix file does not conform to the expected layout."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
