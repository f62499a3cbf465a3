"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SourcewatchError(Exception):
    """Base class for all errors raised by this package."""


class RegistryParseError(SourcewatchError):
    """The registry document is not well-formed."""


class SchemaViolation(SourcewatchError):
    """A registry document violates the attribute schema.

    Carries the offending source and/or attribute so callers can point
    operators at the exact field.
    """

    def __init__(self, message: str, *, source_id: str | None = None,
                 attribute_id: str | None = None):
        self.source_id = source_id
        self.attribute_id = attribute_id
        parts = [message]
        if source_id is not None:
            parts.append(f"source={source_id!r}")
        if attribute_id is not None:
            parts.append(f"attribute={attribute_id!r}")
        super().__init__(" ".join(parts))


class ValueKindMismatch(SourcewatchError):
    """An attribute value cannot be interpreted under its declared kind."""


class UnknownAttributeError(SourcewatchError):
    """An attribute id is not part of the schema."""


class MatrixError(SourcewatchError):
    """Invalid request against an assessment matrix (unknown source,
    mismatched data types, candidate without a stored pair)."""


class ConfigurationError(SourcewatchError):
    """Invalid runtime configuration (missing standard source, bad paths,
    negative parameters)."""


class UnknownSourceError(SourcewatchError):
    """An operation referenced a source id that is not registered."""


class NotActivatableError(SourcewatchError):
    """Activation was requested for a source that cannot be activated
    from its current state."""


class StorageError(SourcewatchError):
    """The scenario store could not read or write its log segments."""


class TransitionError(SourcewatchError):
    """A health-state transition was requested that the state machine does
    not allow (for example retiring a source twice)."""
