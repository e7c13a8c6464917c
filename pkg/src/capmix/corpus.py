"""Sharded JSONL corpus model: records, parsing, streaming, shard writing, manifests.

On-disk layout:

* **Shard** — UTF-8 JSONL, one record object per line.
* **Manifest** — JSON file listing shard paths, record counts, and SHA-256
  checksums; shard paths are stored relative to the manifest when possible.

Record schema (unknown top-level keys are rejected so nothing gets silently
dropped on rewrite; free-form extras belong in ``meta``)::

    {"id": "...", "image_ref": "...", "alt_text": "...",
     "captions": {"ssc": "...", "dsc": "...", "dscplus": "...", "afc": "..."},
     "gt_objects": ["dog", ...], "ocr_text": "...", "meta": {"k": "v"}}

Records are immutable after parse and safe to hand between workers; streaming
keeps memory independent of corpus size.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Union

from .errors import (
    ChecksumMismatch,
    DuplicateFormatKey,
    EmptyRecord,
    IoFailure,
    MalformedSyntax,
    MissingField,
    RecordParseError,
    SerializationFailure,
    ShardMissing,
    UnknownFormatKey,
)
from .formats import CAPTION_KEYS, CaptionFormat

SCHEMA_VERSION = 1

_TOP_LEVEL_FIELDS = frozenset(
    {"id", "image_ref", "alt_text", "captions", "gt_objects", "ocr_text", "meta"}
)


@dataclass(frozen=True)
class CaptionRecord:
    """One image's identity plus its alt text and per-format synthetic captions."""

    id: str
    image_ref: str
    alt_text: str | None = None
    captions: dict[str, str] = field(default_factory=dict)
    gt_objects: frozenset[str] | None = None
    ocr_text: str | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise MissingField("id")
        if not self.image_ref or not isinstance(self.image_ref, str):
            raise MissingField("image_ref")
        if self.alt_text == "":
            object.__setattr__(self, "alt_text", None)
        unknown = set(self.captions) - CAPTION_KEYS
        if unknown:
            key = sorted(unknown)[0]
            hint = "alt text belongs in the alt_text field" if key == "alt" else ""
            raise UnknownFormatKey(key, hint)
        for key, text in self.captions.items():
            if not isinstance(text, str) or not text:
                raise MalformedSyntax(f"caption text for {key!r} must be a non-empty string")
        if self.alt_text is None and not self.captions:
            raise EmptyRecord(f"record {self.id!r} has no alt_text and no captions")
        if self.gt_objects is not None:
            # Ground-truth object names are canonical, casefolded set members.
            normalized = frozenset(o.casefold().strip() for o in self.gt_objects if o.strip())
            object.__setattr__(self, "gt_objects", normalized)

    def caption_text(self, source: Union[str, CaptionFormat]) -> str | None:
        """Text for a caption source: ``"alt"`` for alt text, else a format key."""
        key = source.value if isinstance(source, CaptionFormat) else source
        if key == CaptionFormat.ALT_TEXT.value:
            return self.alt_text
        return self.captions.get(key)

    def replace(self, **changes) -> "CaptionRecord":
        return replace(self, **changes)


class _DuplicateKey(Exception):
    def __init__(self, key: str):
        self.key = key


def _pairs_hook(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise _DuplicateKey(key)
        obj[key] = value
    return obj


def _require_str_or_none(obj: dict, key: str):
    value = obj.get(key)
    if value is not None and not isinstance(value, str):
        raise MalformedSyntax(f"field {key!r} must be a string")
    return value


def parse_record(line: str) -> CaptionRecord:
    """Parse and fully validate a single serialized record.

    Raises a :class:`RecordParseError` subclass on any problem; lenient
    streams catch these and keep going.
    """
    try:
        obj = json.loads(line, object_pairs_hook=_pairs_hook)
    except _DuplicateKey as e:
        if e.key in CAPTION_KEYS:
            raise DuplicateFormatKey(e.key) from None
        raise MalformedSyntax(f"duplicate key {e.key!r}") from None
    except json.JSONDecodeError as e:
        raise MalformedSyntax(f"not valid JSON: {e.msg}") from None
    if not isinstance(obj, dict):
        raise MalformedSyntax("record must be a JSON object")

    unknown = set(obj) - _TOP_LEVEL_FIELDS
    if unknown:
        raise MalformedSyntax(f"unknown top-level fields: {', '.join(sorted(unknown))}")

    rec_id = obj.get("id")
    if not rec_id:
        raise MissingField("id")
    if not isinstance(rec_id, str):
        raise MalformedSyntax("field 'id' must be a string")
    image_ref = obj.get("image_ref")
    if not image_ref:
        raise MissingField("image_ref")
    if not isinstance(image_ref, str):
        raise MalformedSyntax("field 'image_ref' must be a string")

    captions = obj.get("captions", {})
    if not isinstance(captions, dict):
        raise MalformedSyntax("field 'captions' must be an object")

    gt_objects = obj.get("gt_objects")
    if gt_objects is not None:
        if not isinstance(gt_objects, list) or not all(isinstance(o, str) for o in gt_objects):
            raise MalformedSyntax("field 'gt_objects' must be a list of strings")
        gt_objects = frozenset(gt_objects)

    meta = obj.get("meta", {})
    if not isinstance(meta, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
    ):
        raise MalformedSyntax("field 'meta' must map strings to strings")

    return CaptionRecord(
        id=rec_id,
        image_ref=image_ref,
        alt_text=_require_str_or_none(obj, "alt_text"),
        captions=dict(captions),
        gt_objects=gt_objects,
        ocr_text=_require_str_or_none(obj, "ocr_text"),
        meta=dict(meta),
    )


def serialize_record(record: CaptionRecord) -> str:
    """Deterministic single-line serialization; ``parse_record`` inverts it exactly."""
    obj: dict = {"id": record.id, "image_ref": record.image_ref}
    if record.alt_text is not None:
        obj["alt_text"] = record.alt_text
    if record.captions:
        obj["captions"] = {k: record.captions[k] for k in sorted(record.captions)}
    if record.gt_objects is not None:
        obj["gt_objects"] = sorted(record.gt_objects)
    if record.ocr_text is not None:
        obj["ocr_text"] = record.ocr_text
    if record.meta:
        obj["meta"] = {k: record.meta[k] for k in sorted(record.meta)}
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


# --------------------------------------------------------------------------
# Shards and manifests
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Shard:
    path: str
    record_count: int
    checksum: str


@dataclass
class DatasetManifest:
    shards: list[Shard] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        paths = [s.path for s in self.shards]
        if len(paths) != len(set(paths)):
            raise ValueError("manifest shard paths must be unique")

    @property
    def total_records(self) -> int:
        return sum(s.record_count for s in self.shards)


def write_shard(
    records: Iterable[CaptionRecord],
    path: str | Path,
    max_records: int | None = None,
    *,
    keep_empty: bool = False,
) -> list[Shard]:
    """Write records as JSONL, rolling over to a new file every ``max_records``.

    ``path`` acts as a template: ``out/train.jsonl`` produces
    ``out/train-00000.jsonl``, ``out/train-00001.jsonl``, ... Returns one
    :class:`Shard` per file written (none for an empty stream unless
    ``keep_empty`` is set).
    """
    if max_records is not None and max_records < 1:
        raise ValueError(f"max_records must be >= 1, got {max_records}")
    base = Path(path)
    if base.suffix != ".jsonl":
        base = base.with_name(base.name + ".jsonl")
    try:
        base.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create output directory {base.parent}: {e}") from e

    shards: list[Shard] = []
    handle = None
    hasher = None
    count = 0
    shard_path: Path | None = None

    def open_next() -> None:
        nonlocal handle, hasher, count, shard_path
        shard_path = base.with_name(f"{base.stem}-{len(shards):05d}.jsonl")
        try:
            handle = open(shard_path, "wb")
        except OSError as e:
            raise IoFailure(f"cannot open shard {shard_path}: {e}") from e
        hasher = hashlib.sha256()
        count = 0

    def close_current() -> None:
        nonlocal handle
        if handle is None:
            return
        try:
            handle.close()
        except OSError as e:
            raise IoFailure(f"cannot finalize shard {shard_path}: {e}") from e
        handle = None
        shards.append(Shard(str(shard_path.resolve()), count, hasher.hexdigest()))

    try:
        for record in records:
            if handle is None:
                open_next()
            try:
                data = (serialize_record(record) + "\n").encode("utf-8")
            except (TypeError, ValueError, UnicodeEncodeError) as e:
                raise SerializationFailure(f"record {record.id!r}: {e}") from e
            try:
                handle.write(data)
            except OSError as e:
                raise IoFailure(f"write failed on {shard_path}: {e}") from e
            hasher.update(data)
            count += 1
            if max_records is not None and count >= max_records:
                close_current()
        if handle is None and not shards and keep_empty:
            open_next()
        close_current()
    finally:
        if handle is not None:
            handle.close()
    return shards


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write the manifest, relativizing shard paths that live under its directory."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        base = path.parent.resolve()
        entries = []
        for shard in manifest.shards:
            p = Path(shard.path)
            stored = shard.path
            if p.is_absolute():
                try:
                    stored = str(p.resolve().relative_to(base))
                except ValueError:
                    stored = str(p)
            entries.append(
                {"path": stored, "record_count": shard.record_count, "checksum": shard.checksum}
            )
        payload = {"schema_version": manifest.schema_version, "shards": entries}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write manifest {path}: {e}") from e


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest, resolving relative shard paths against its directory."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise IoFailure(f"cannot read manifest {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise MalformedSyntax(f"manifest {path} is not valid JSON: {e.msg}") from None
    if not isinstance(data, dict) or not isinstance(data.get("shards"), list):
        raise MalformedSyntax(f"manifest {path} must be an object with a 'shards' list")
    base = path.parent.resolve()
    shards = []
    for entry in data["shards"]:
        if not isinstance(entry, dict):
            raise MalformedSyntax(f"manifest {path}: shard entries must be objects")
        try:
            shard_path = Path(entry["path"])
            record_count = int(entry["record_count"])
            checksum = str(entry["checksum"])
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedSyntax(f"manifest {path}: bad shard entry: {e}") from None
        if record_count < 0:
            raise MalformedSyntax(f"manifest {path}: negative record_count")
        if not shard_path.is_absolute():
            shard_path = base / shard_path
        shards.append(Shard(str(shard_path), record_count, checksum))
    return DatasetManifest(shards=shards, schema_version=int(data.get("schema_version", SCHEMA_VERSION)))


def manifest_for_shards(shards: Iterable[Shard]) -> DatasetManifest:
    return DatasetManifest(shards=list(shards))


# --------------------------------------------------------------------------
# Streaming
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RecordError:
    """A per-line failure surfaced by a lenient stream."""

    shard_path: str
    line_number: int
    error: Exception


StreamEvent = Union[CaptionRecord, RecordError]


def stream_manifest(manifest: DatasetManifest, *, strict: bool = False) -> Iterator[StreamEvent]:
    """Yield records shard-by-shard in file order, with O(1) memory in corpus size.

    Lenient mode (default) yields a :class:`RecordError` event for each
    malformed line instead of aborting, so yielded records plus error events
    always equal the number of input lines. Strict mode raises on the first
    malformed line and verifies each shard's SHA-256 checksum.
    """
    for shard in manifest.shards:
        path = Path(shard.path)
        if not path.is_file():
            raise ShardMissing(str(path))
        hasher = hashlib.sha256() if strict else None
        with open(path, "rb") as f:
            for line_number, raw in enumerate(f, 1):
                if hasher is not None:
                    hasher.update(raw)
                try:
                    text = raw.decode("utf-8")
                except UnicodeDecodeError as e:
                    err: RecordParseError = MalformedSyntax(f"not valid UTF-8: {e}")
                    if strict:
                        raise err from None
                    yield RecordError(str(path), line_number, err)
                    continue
                try:
                    yield parse_record(text.rstrip("\r\n"))
                except RecordParseError as err:
                    if strict:
                        raise
                    yield RecordError(str(path), line_number, err)
        if hasher is not None and hasher.hexdigest() != shard.checksum:
            raise ChecksumMismatch(str(path), shard.checksum, hasher.hexdigest())


def read_records(
    manifest: DatasetManifest,
    *,
    strict: bool = False,
    on_error: Callable[[RecordError], None] | None = None,
) -> Iterator[CaptionRecord]:
    """Like :func:`stream_manifest` but yields records only.

    Error events are passed to ``on_error`` (dropped when it is None).
    """
    for event in stream_manifest(manifest, strict=strict):
        if isinstance(event, RecordError):
            if on_error is not None:
                on_error(event)
            continue
        yield event
