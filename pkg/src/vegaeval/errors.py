"""Exception types shared across the package."""

from __future__ import annotations


class VegaEvalError(Exception):
    """Base class for all package errors."""


class MalformedDocument(VegaEvalError):
    """A spec document could not be parsed as JSON."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class UnsupportedFeature(VegaEvalError):
    """Spec uses a construct outside the supported subset (layer, repeat, geoshape, ...)."""


class ReferenceInvalid(VegaEvalError):
    """A benchmark reference spec failed schema validation."""


class UnreadableSource(VegaEvalError):
    """A data source could not be read or decoded."""


class RaggedRows(VegaEvalError):
    """A delimited file has rows whose arity differs from the header."""


class UnknownField(VegaEvalError):
    """An expression or transform references a column that does not exist."""


class TypeMismatch(VegaEvalError):
    """An expression applied an operator to incompatible operand types."""


class UnsupportedTransform(VegaEvalError):
    """A transform or predicate construct outside the supported subset."""


class MalformedVerdict(VegaEvalError):
    """A judge response could not be parsed into a well-formed verdict."""


class MissingImage(VegaEvalError):
    """An operation requiring chart images was given an empty or absent image."""


class SchemaViolation(VegaEvalError):
    """A manifest record does not conform to the expected record schema."""


class EmptySample(VegaEvalError):
    """A statistic was requested over an empty sample."""


class DegenerateInput(VegaEvalError):
    """Statistical input is degenerate (zero variance, too few points)."""


class SingularSystem(VegaEvalError):
    """An unregularized linear system is singular (collinear inputs)."""


class NoEncodingFields(VegaEvalError):
    """A reference spec encodes no data fields, so no column can be dropped."""
