"""Exception types shared by the parsers and the timing engine."""

from __future__ import annotations


class PreslackError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PreslackError):
    """Syntax error in an input file."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class StructuralError(PreslackError):
    """Input is syntactically fine but describes something inconsistent."""


class GraphError(PreslackError):
    """Problem building or traversing the timing graph."""


class LabelError(PreslackError):
    """Arrival-time labels or predictions do not cover the graph."""

    def __init__(self, message: str, missing: list[str] | None = None):
        self.missing = list(missing or [])
        super().__init__(message)
