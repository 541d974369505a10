# -*- coding: utf-8 -*-
"""
Exception hierarchy.

Library code raises these; only the CLI maps them to exit codes.
"""


class ClassroomKDError(Exception):
    """Base class for every error raised by classroom_kd."""

    exit_code: int = 1


class InvalidArgumentError(ClassroomKDError, ValueError):
    """Bad shapes, out-of-range labels, non-positive temperatures, ..."""

    exit_code = 2


class ConfigError(ClassroomKDError):
    """Experiment or suite configuration failed validation."""

    exit_code = 2

    def __init__(self, message: str, field_errors: list[str] | None = None):
        self.field_errors = field_errors or []
        if self.field_errors:
            message = message + "\n" + "\n".join(f"  {e}" for e in self.field_errors)
        super().__init__(message)


class DatasetFormatError(InvalidArgumentError):
    """Malformed dataset file; the message names the line or column."""


class ArtifactIOError(ClassroomKDError, OSError):
    """An output could not be written or an input could not be read."""

    exit_code = 3


class WeightFileError(ArtifactIOError):
    """Corrupt, truncated or mismatched weight file."""


class MissingArtifactError(ClassroomKDError):
    """A required artifact (mentor weights, epoch log) does not exist."""

    exit_code = 4


class NumericalError(ClassroomKDError, ArithmeticError):
    """Non-finite or exploding loss or gradient; carries training context."""

    exit_code = 5

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        self.epoch = epoch
        self.batch = batch
        if epoch is not None:
            message = f"{message} (epoch={epoch}, batch={batch})"
        super().__init__(message)


class LogFormatError(InvalidArgumentError):
    """Malformed run artifact (epoch log, per-class table, summary); names the row."""
