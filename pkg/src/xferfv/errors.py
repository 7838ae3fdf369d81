"""Exception taxonomy.

FormatError covers malformed inputs (bad bundle bytes, bad tables); the CLI
maps it to exit code 2. EstimatorError covers inputs on which an estimator
is mathematically undefined; the CLI maps it to exit code 3.
"""

from __future__ import annotations


class XferError(Exception):
    """Base class for all package errors."""


class FormatError(XferError):
    """Malformed input data (files, tables, inconsistent bundle sets)."""


class BundleFormatError(FormatError):
    """Bad bundle bytes; carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InvalidBundleError(FormatError):
    """An in-memory bundle violates its invariants; carries diagnostics."""

    def __init__(self, diagnostics):
        codes = ", ".join(d.code for d in diagnostics)
        super().__init__(f"bundle violates invariants: {codes}")
        self.diagnostics = list(diagnostics)


class EstimatorError(XferError):
    """An estimator's value is undefined for the given inputs."""


class NoSharedClassError(EstimatorError):
    """NO_SHARED_CLASS: no foreground class occurs in two distinct cases."""


class SingularCovarianceError(EstimatorError):
    """A covariance (or mixture) is singular where an inverse/log-det is needed."""


class PosteriorsUnavailableError(EstimatorError):
    """UNAVAILABLE: the estimator needs source posteriors and none were exported."""
