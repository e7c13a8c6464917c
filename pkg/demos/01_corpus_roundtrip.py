#!/usr/bin/env python3
"""Walkthrough: records, shards, manifests, and lenient streaming.

Builds a tiny corpus in a temp directory, writes it as rolled-over JSONL
shards with checksums, damages one line on purpose, and shows how lenient
streaming isolates the damage while strict mode refuses it.
"""

import tempfile
from pathlib import Path

from capmix import (
    CaptionRecord,
    RecordError,
    load_manifest,
    save_manifest,
    stream_manifest,
    write_shard,
)
from capmix.corpus import manifest_for_shards
from capmix.errors import RecordParseError

workdir = Path(tempfile.mkdtemp(prefix="capmix_demo_"))
print(f"working in {workdir}\n")

# ---------------------------------------------------------------------------
# 1. Build records. Alt text lives in its own field; synthetic captions go
#    in the captions map under their format keys.
# ---------------------------------------------------------------------------
records = [
    CaptionRecord(
        id=f"r{i:03d}",
        image_ref=f"images/{i:03d}.jpg",
        alt_text=f"stock photo {i} buy now",
        captions={"ssc": f"A sample object number {i} on a plain background."},
        gt_objects=frozenset({"dog"}) if i % 2 else None,
    )
    for i in range(7)
]

# ---------------------------------------------------------------------------
# 2. Write shards (rollover every 3 records) and a manifest with checksums.
# ---------------------------------------------------------------------------
shards = write_shard(records, workdir / "corpus.jsonl", max_records=3)
for shard in shards:
    print(f"shard {Path(shard.path).name}: {shard.record_count} records, sha256={shard.checksum[:12]}…")
manifest = manifest_for_shards(shards)
save_manifest(manifest, workdir / "manifest.json")
print(f"manifest total: {manifest.total_records} records\n")

# ---------------------------------------------------------------------------
# 3. Damage one line, then stream leniently: records plus error events always
#    add up to the number of input lines.
# ---------------------------------------------------------------------------
victim = Path(shards[1].path)
lines = victim.read_bytes().splitlines(keepends=True)
lines[1] = b'{"id": "broken", "oops\n'
victim.write_bytes(b"".join(lines))

loaded = load_manifest(workdir / "manifest.json")
ok, bad = 0, 0
for event in stream_manifest(loaded):
    if isinstance(event, RecordError):
        bad += 1
        print(f"error event at {Path(event.shard_path).name}:{event.line_number}: {event.error}")
    else:
        ok += 1
print(f"lenient stream: {ok} records + {bad} error events = {ok + bad} input lines\n")

# Strict mode aborts on the same damage.
try:
    list(stream_manifest(loaded, strict=True))
except RecordParseError as e:
    print(f"strict stream raised as expected: {e}")
