# -*- coding: utf-8 -*-

"""Exception hierarchy for :mod:`tempo_embed`."""

import typing as ty


class TempoEmbedError(ValueError):
    """Base class for all domain errors raised by the package."""


class ParseError(TempoEmbedError):
    """Raised when a row of an interaction file cannot be parsed."""

    def __init__(self, message: str, line_number: ty.Optional[int] = None) -> None:
        """Initialize the parse error.

        :param message: The error message.
        :type message: str
        :param line_number: The 1-based line number of the offending row.
        :type line_number: ty.Optional[int]
        """
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SchemaError(TempoEmbedError):
    """Raised when rows of an interaction file disagree on their layout."""


class ArgumentError(TempoEmbedError):
    """Raised when an argument is outside its valid range."""


class DimensionError(TempoEmbedError):
    """Raised when tensor shapes are incompatible."""


class NumericError(TempoEmbedError):
    """Raised when a computation produces a non-finite value."""


class TraceError(TempoEmbedError):
    """Raised when backpropagation meets a tensor that was not traced."""


class ModelConfigError(TempoEmbedError):
    """Raised when model parameters and embeddings do not fit together."""


class UndefinedEntropyError(TempoEmbedError):
    """Raised when a per-user statistic is requested for a user without history."""


class EmptyLogError(TempoEmbedError):
    """Raised when an operation needs at least one interaction."""


class ScaleGuardError(TempoEmbedError):
    """Raised when an oracle is asked to run beyond the scale it supports."""


class CheckpointError(TempoEmbedError):
    """Raised when a checkpoint file cannot be read back."""
