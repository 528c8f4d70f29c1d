"""Exception types shared across the package.

Every error derives from :class:`FatigueMlpError` so the command-line layer can
report module failures verbatim. Errors that stem from bad user input (flags,
config values, invalid conditions) also derive from :class:`ValidationError`;
the CLI maps those to exit code 2.
"""

from __future__ import annotations


class FatigueMlpError(Exception):
    """Base class for all package errors."""


class ValidationError(FatigueMlpError, ValueError):
    """Input violates a documented invariant."""


# --- dataset -----------------------------------------------------------------


class InvalidCondition(ValidationError):
    pass


class InvalidRecord(ValidationError):
    pass


class CsvError(FatigueMlpError, ValueError):
    """CSV ingestion failure tied to a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedRow(CsvError):
    pass


class NonMonotonicCycles(CsvError):
    pass


class DecreasingCrackLength(CsvError):
    pass


class MixedConditionInSeries(CsvError):
    pass


class EmptyInput(CsvError):
    pass


class InvalidPointCount(ValidationError):
    pass


class InvalidSeries(ValidationError):
    pass


# --- pipeline ----------------------------------------------------------------


class InvalidSplitSpec(ValidationError):
    pass


class DegenerateSeries(FatigueMlpError):
    pass


class EmptyDevelopmentSet(FatigueMlpError):
    pass


class DegenerateDimension(FatigueMlpError):
    def __init__(self, dimension: str):
        self.dimension = dimension
        super().__init__(f"dimension {dimension!r} has zero spread (min == max)")


# --- nn ------------------------------------------------------------------------


class InvalidArchitecture(ValidationError):
    pass


class InvalidTrainConfig(ValidationError):
    pass


class LengthMismatch(FatigueMlpError, ValueError):
    pass


class EmptyBatch(FatigueMlpError, ValueError):
    pass


class EmptySplit(FatigueMlpError):
    pass


class NonFiniteLoss(FatigueMlpError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}; training diverged")


class MissingNormalizer(FatigueMlpError):
    pass


class CorruptModelFile(FatigueMlpError):
    pass


class VersionMismatch(FatigueMlpError):
    pass


# --- eval ----------------------------------------------------------------------


class EmptyInputError(FatigueMlpError, ValueError):
    """Raised by MAPE on zero-length input."""


class NearZeroTruth(FatigueMlpError, ValueError):
    def __init__(self, index: int, value: float):
        self.index = index
        super().__init__(f"|a_true[{index}]| = {abs(value)!r} is below 1e-9 mm")


class SinkFailure(FatigueMlpError, OSError):
    pass


# --- cli -----------------------------------------------------------------------


class ManifestMismatch(FatigueMlpError):
    pass
