#!/usr/bin/env python3
"""Walkthrough: hallucination metrics and provider clients, fully offline.

Scores object hallucination against ground-truth object sets, runs the
assertion-then-VQA accuracy metric with the deterministic grounded mock,
and drives the recaptioning client against the local scripted HTTP server
(exercising retries and idempotent resume without any real provider).
"""

import tempfile
from pathlib import Path

from capmix import CaptionFormat, CaptionRecord, capscore, chair, mentioned_objects, write_shard
from capmix.corpus import manifest_for_shards, read_records
from capmix.hallucination import ObjectVocabulary, default_vocabulary
from capmix.mockserver import MockProviderServer
from capmix.providers import (
    CaptionClient,
    GroundedMockVqa,
    ProviderEndpoint,
    quality_post_process,
    recaption_to_shards,
)

workdir = Path(tempfile.mkdtemp(prefix="capmix_metrics_"))

# ---------------------------------------------------------------------------
# 1. Object mentions and the instance/sentence hallucination scores.
# ---------------------------------------------------------------------------
vocab = default_vocabulary()
print("mentions:", dict(mentioned_objects("A man walks two dogs past a hot dog stand.", vocab)))

records = [
    CaptionRecord(
        id="h1", image_ref="images/h1.jpg",
        captions={"dsc": "A dog chases a frisbee. A cat watches from a bench."},
        gt_objects=frozenset({"dog", "frisbee", "bench"}),
    ),
    CaptionRecord(
        id="h2", image_ref="images/h2.jpg",
        captions={"dsc": "A parked car near a bicycle."},
        gt_objects=frozenset({"car", "bicycle"}),
    ),
]
report = chair(records, "dsc", vocab)
print(f"instance-level score: {report.chair_i:.3f} "
      f"({report.hallucinated_instances}/{report.mentioned_instances} hallucinated)")
print(f"sentence-level score: {report.chair_s:.3f} "
      f"({report.flagged_sentences}/{report.total_sentences} sentences flagged)\n")

# A custom two-object vocabulary works the same way.
tiny = ObjectVocabulary(frozenset({"dog", "cat"}), {"puppy": "dog"})
print("custom vocab mentions:", dict(mentioned_objects("a puppy and two cats", tiny)), "\n")

# ---------------------------------------------------------------------------
# 2. Assertion accuracy with the grounded mock VQA: assertions are extracted
#    per caption, posed as yes/no questions, and scored 0..100. The mock
#    verifies a claim only when all its content words appear in the image's
#    ground text, so the hallucinated zebra claim fails.
# ---------------------------------------------------------------------------
claim_records = [
    CaptionRecord(
        id="q1", image_ref="images/q1.jpg",
        captions={"dsc": "A dog is here. A frisbee is here. A zebra is here."},
        gt_objects=frozenset({"dog", "frisbee", "bench"}),
    ),
    CaptionRecord(
        id="q2", image_ref="images/q2.jpg",
        captions={"dsc": "A car is here. A bicycle is here."},
        gt_objects=frozenset({"car", "bicycle"}),
    ),
]
vqa = GroundedMockVqa.from_records(claim_records)
cap_report = capscore(claim_records, "dsc", None, vqa)
print(f"capscore: {cap_report.capscore:.1f} "
      f"({cap_report.assertions_verified}/{cap_report.assertions_total} assertions verified)\n")

# ---------------------------------------------------------------------------
# 3. Recaptioning through the HTTP client against the local mock server,
#    with a scripted 429 burst to show the retry policy, then a resume pass.
# ---------------------------------------------------------------------------
corpus = [
    CaptionRecord(id=f"r{i}", image_ref=f"images/{i}.jpg", alt_text=f"alt {i}")
    for i in range(6)
]
manifest = manifest_for_shards(write_shard(corpus, workdir / "in" / "c.jsonl"))

with MockProviderServer(fail_script={"r2": [429, 429]}, fail_always={"r4"}) as server:
    endpoint = ProviderEndpoint(base_url=server.base_url, max_retries=2,
                                backoff_base_ms=20, max_in_flight=3)
    with CaptionClient(endpoint) as client:
        _, stats = recaption_to_shards(
            manifest, CaptionFormat.SSC, client, workdir / "out", post_process=False
        )
    print(f"first pass: {stats.succeeded} ok, {stats.failed} failed "
          f"(r2 retried {server.attempts['r2']} times, r4 exhausted its budget)")

with MockProviderServer() as server:  # healthy now
    endpoint = ProviderEndpoint(base_url=server.base_url, max_retries=2, backoff_base_ms=20)
    with CaptionClient(endpoint) as client:
        out_manifest, stats = recaption_to_shards(
            manifest, CaptionFormat.SSC, client, workdir / "out", post_process=False
        )
    print(f"resume pass: requested only {sorted(server.ids_requested())}")
print("final ids:", sorted(r.id for r in read_records(out_manifest)), "\n")

# ---------------------------------------------------------------------------
# 4. The heuristic quality gate used after generation.
# ---------------------------------------------------------------------------
raw = "The image shows a spaniel resting on a striped armchair."
outcome = quality_post_process(raw, CaptionFormat.SSC)
print(f"post-process: {raw!r} -> {outcome.caption!r} (accepted={outcome.accepted})")
