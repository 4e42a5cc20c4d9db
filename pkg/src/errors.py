"""
Errors Module

Exception types raised by the oracles, losses, datasets and the experiment harness.
"""

from typing import List, Optional


class DecisionToolkitError(Exception):
    """Base class for every error raised by this package."""


class InvalidCostError(DecisionToolkitError, ValueError):
    """Cost vector contains NaN or infinite entries."""


class DimensionMismatchError(DecisionToolkitError, ValueError):
    """Array length does not match the oracle or model dimension."""


class UnsupportedCapabilityError(DecisionToolkitError):
    """Oracle does not offer the requested capability (relaxation, enumeration)."""


class SizeLimitError(DecisionToolkitError, ValueError):
    """Instance is above the size an exact routine is allowed to handle."""


class InfeasibleModelError(DecisionToolkitError):
    """A user oracle reported that its model has no feasible solution."""


class SolverFailureError(DecisionToolkitError):
    """Oracle failed while solving one dataset row."""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class DatasetFormatError(DecisionToolkitError, ValueError):
    """Dataset file is malformed or truncated."""


class ChecksumError(DatasetFormatError):
    """Dataset payload does not match its stored checksum."""


class FingerprintMismatchError(DecisionToolkitError, ValueError):
    """Dataset was built for a different oracle."""


class ConfigValidationError(DecisionToolkitError, ValueError):
    """Experiment config has one or more violations; all are kept in `errors`."""

    def __init__(self, errors: List[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)
