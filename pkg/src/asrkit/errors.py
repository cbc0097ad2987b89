"""Exception hierarchy shared by all asrkit modules.

The CLI maps these onto process exit codes: usage/configuration problems
exit 1, data/validation problems exit 2, numerical infeasibility exits 3.
"""

from __future__ import annotations


class AsrkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AsrkitError):
    """Invalid configuration or invocation (CLI exit code 1)."""


class ValidationError(AsrkitError):
    """Input data violates a documented invariant (CLI exit code 2)."""

    def __init__(self, message: str, *, field: str | None = None,
                 record_id: str | None = None, line: int | None = None):
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if record_id is not None:
            parts.append(f"id {record_id!r}")
        if field is not None:
            parts.append(f"field {field!r}")
        prefix = " ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.field = field
        self.record_id = record_id
        self.line = line


class ParseError(ValidationError):
    """Malformed input that cannot be decoded at all (CLI exit code 2)."""


class EmptyCorpusError(ValidationError):
    """An operation that needs at least one record/token got none."""


class InfeasibleBandError(AsrkitError):
    """An alignment band admits no complete lattice path (CLI exit code 3)."""
