"""Exception types raised across the package."""

from __future__ import annotations


class GuidestackError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(GuidestackError):
    """A dataset schema is invalid or a declared column is missing."""


class DatasetError(GuidestackError):
    """A dataset as a whole is unusable (empty, too small to split, ...)."""


class RowError(GuidestackError):
    """A single data row failed parsing or validation."""

    def __init__(self, index: int, message: str):
        super().__init__(f"row {index}: {message}")
        self.index = index


class RangeError(GuidestackError):
    """A score lies outside the range its declared scale allows."""

    def __init__(self, value: float, message: str):
        super().__init__(message)
        self.value = value


class SequenceError(GuidestackError):
    """Base class for sgRNA sequence validation failures."""


class SequenceLengthError(SequenceError):
    def __init__(self, length: int):
        super().__init__(f"expected 23 bases, got {length}")
        self.length = length


class SequenceAlphabetError(SequenceError):
    def __init__(self, position: int, symbol: str):
        super().__init__(f"invalid symbol {symbol!r} at position {position} (0-based)")
        self.position = position
        self.symbol = symbol


class PamError(SequenceError):
    def __init__(self, suffix: str):
        super().__init__(f"last three bases {suffix!r} do not end in GG")
        self.suffix = suffix


class EncodingError(GuidestackError):
    """A feature vector violates the one-hot layout invariants."""


class FitError(GuidestackError):
    """Model training failed; message carries family and loss context."""


class NumericError(GuidestackError):
    """A linear solve was singular or produced a non-finite result."""


class ConfigError(GuidestackError):
    """An experiment configuration is missing sections or inconsistent."""


class UndefinedMetricError(GuidestackError):
    """The requested metric has no defined value on these inputs."""


class ArchiveError(GuidestackError):
    """A model archive is malformed or has an unsupported format version."""
