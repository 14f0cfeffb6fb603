"""Exception hierarchy, mapped onto CLI exit codes."""


class CBSurvError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(CBSurvError):
    """Invalid user-supplied settings (fractions, ratios, layer sizes, ...)."""

    exit_code = 2


class DataError(CBSurvError):
    """Problems with the data itself (schema, parsing, domain violations)."""

    exit_code = 3


class SchemaError(DataError):
    """A required column is missing from the input file."""


class ParseError(DataError):
    """A cell failed to parse as a finite, valid value."""


class ValidationError(DataError):
    """A parsed value violates a dataset invariant."""


class NumericError(CBSurvError):
    """Non-finite intermediates, overflow, or failed numerical procedures."""

    exit_code = 4
