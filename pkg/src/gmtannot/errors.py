"""Exception hierarchy and the diagnostic record shared by every module."""

from __future__ import annotations

from dataclasses import dataclass


class AnnotationError(Exception):
    """Base class. ``code`` is the stable machine-readable error name."""

    code = "error"

    def __init__(self, message: str = "", *, line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def to_diagnostic(self, file: str = "-") -> Diagnostic:
        return Diagnostic("error", self.code, self.message, file, self.line, self.col)


class InvalidArgument(AnnotationError, ValueError):
    code = "invalid-argument"


class DuplicateIdentifier(AnnotationError):
    code = "duplicate-identifier"


class NotFound(AnnotationError, LookupError):
    code = "not-found"


class UnresolvedReference(AnnotationError):
    code = "unresolved-reference"

    def __init__(self, fragment: str, message: str = ""):
        super().__init__(message or f"no node or mark named {fragment!r}")
        self.fragment = fragment


class OutOfRange(AnnotationError):
    code = "out-of-range"


class UnknownDocument(AnnotationError):
    code = "unknown-document"


class UnitMismatch(AnnotationError):
    code = "unit-mismatch"


class CyclicAnchor(AnnotationError):
    code = "cyclic-anchor"

    def __init__(self, message: str = "", members: tuple = ()):
        super().__init__(message)
        self.members = members


class ParseError(AnnotationError):
    code = "parse-error"


class UnknownElement(ParseError):
    code = "unknown-element"


class ConflictingAnchor(ParseError):
    code = "conflicting-anchor"


class SerializationRefused(AnnotationError):
    code = "serialization-refused"


class InvalidCategory(AnnotationError, ValueError):
    code = "invalid-category"


class AlignmentError(AnnotationError):
    code = "alignment-error"

    def __init__(self, index: int, message: str = ""):
        super().__init__(message or f"record {index} does not align with the text")
        self.index = index


class FormatError(AnnotationError):
    code = "format-error"


class AmbiguityError(AnnotationError):
    code = "ambiguity-error"


class IncompatibleLayers(AnnotationError):
    code = "incompatible-layers"


class NotTextual(AnnotationError):
    code = "not-textual"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning" | "info"
    code: str
    message: str
    file: str = "-"
    line: int = 0
    col: int = 0

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def with_file(self, file: str) -> Diagnostic:
        return Diagnostic(self.severity, self.code, self.message, file, self.line, self.col)

    def format(self) -> str:
        message = " ".join(self.message.split())
        return f"{self.severity}:{self.file}:{self.line}:{self.col}:{self.code}:{message}"

    __str__ = format


def error(code: str, message: str, line: int = 0, col: int = 0) -> Diagnostic:
    return Diagnostic("error", code, message, "-", line, col)


def warning(code: str, message: str, line: int = 0, col: int = 0) -> Diagnostic:
    return Diagnostic("warning", code, message, "-", line, col)
