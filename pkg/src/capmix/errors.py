"""Exception types shared across the toolkit."""

from __future__ import annotations


class CapmixError(Exception):
    """Base class for every error raised by this package."""


class RecordParseError(CapmixError):
    """Base for per-line record validation failures.

    Lenient corpus streams surface these as error events instead of aborting.
    """


class MalformedSyntax(RecordParseError):
    """Line is not a well-formed record (bad JSON, wrong types, unknown fields)."""


class MissingField(RecordParseError):
    def __init__(self, field: str):
        self.field = field
        super().__init__(f"missing required field {field!r}")


class UnknownFormatKey(RecordParseError):
    def __init__(self, key: str, hint: str = ""):
        self.key = key
        msg = f"unknown caption format key {key!r}"
        if hint:
            msg = f"{msg} ({hint})"
        super().__init__(msg)


class DuplicateFormatKey(RecordParseError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"caption format key {key!r} appears more than once")


class EmptyRecord(RecordParseError):
    """Record carries neither alt text nor any caption."""


class ShardMissing(CapmixError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"shard file not found: {path}")


class ChecksumMismatch(CapmixError):
    def __init__(self, path: str, expected: str, actual: str):
        self.path = path
        self.expected = expected
        self.actual = actual
        super().__init__(f"checksum mismatch for {path}: expected {expected}, got {actual}")


class IoFailure(CapmixError):
    """Filesystem-level read/write failure."""


class SerializationFailure(CapmixError):
    """A record could not be serialized to its on-disk form."""


class UnknownScheme(CapmixError):
    def __init__(self, name: str, known: tuple[str, ...] = ()):
        self.name = name
        msg = f"unknown tokenization scheme {name!r}"
        if known:
            msg = f"{msg}; registered schemes: {', '.join(known)}"
        super().__init__(msg)


class EmptyCaption(CapmixError):
    """Caption text is empty where a non-empty caption is required."""


class NoScorableRecords(CapmixError):
    """No record in the corpus satisfied the metric's scoring preconditions."""


class MissingSource(CapmixError):
    def __init__(self, record_id: str, source: str):
        self.record_id = record_id
        self.source = source
        super().__init__(f"record {record_id!r} has no caption for source {source!r}")


class ProviderFailure(CapmixError):
    """An external provider request failed after exhausting its retry budget."""

    def __init__(self, message: str, request_id: str = ""):
        self.request_id = request_id
        super().__init__(message)


class TemplateError(CapmixError):
    """Prompt template references a placeholder that is not available."""


class MissingAltText(CapmixError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"record {record_id!r} requires alt_text for alt-fusion captioning")
