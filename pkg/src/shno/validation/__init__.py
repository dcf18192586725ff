"""Run-config validation for shno."""

from shno.validation.validator import (
    RunConfigValidator,
    Severity,
    ValidationIssue,
    ValidationResult,
    estimated_courant,
    snapshot_count,
)

__all__ = [
    "RunConfigValidator",
    "Severity",
    "ValidationIssue",
    "ValidationResult",
    "estimated_courant",
    "snapshot_count",
]
