#!/usr/bin/env python3
"""Walkthrough: caption format contracts and richness analytics.

Validates captions against the per-format constraint registry, classifies
unlabeled captions, and computes the three richness views: token-length
histograms, unique-entity counts, and assertions per caption.
"""

from capmix import (
    CaptionFormat,
    CaptionRecord,
    ana,
    classify,
    count_tokens,
    default_specs,
    entity_diversity,
    extract_assertions,
    extract_entities,
    token_length_histogram,
    validate,
)

# ---------------------------------------------------------------------------
# 1. Format contracts: the short format wants one sentence in a 5..25 token
#    band; the descriptive format is capped at 78 tokens inclusive.
# ---------------------------------------------------------------------------
specs = default_specs()
print("descriptive caption token ceiling:", specs[CaptionFormat.DSC].max_tokens)

good_short = "A golden retriever plays fetch in the park."
bad_short = "A golden retriever plays fetch. The park is sunny."
for caption in (good_short, bad_short):
    report = validate(caption, CaptionFormat.SSC)
    verdict = "pass" if report.passed else f"fail {[v.constraint for v in report.violations]}"
    print(f"  short-format check ({count_tokens(caption)} tokens): {verdict}")

long_caption = " ".join(f"detail{i}" for i in range(85)) + "."
report = validate(long_caption, CaptionFormat.DSC)
print(f"  over-budget descriptive caption: measured {report.violations[0].measured} "
      f"> limit {report.violations[0].limit}")

# Classification picks the tightest satisfied band (ssc > dsc > dscplus).
print("  classify:", classify(good_short), "/", classify(long_caption), "\n")

# ---------------------------------------------------------------------------
# 2. A small corpus with alt text and two synthetic formats.
# ---------------------------------------------------------------------------
records = [
    CaptionRecord(
        id=f"r{i}",
        image_ref=f"images/{i}.jpg",
        alt_text=f"Canon EOS {i} camera kit with Sigma lens photo",
        captions={
            "ssc": f"A camera and lens arranged on a wooden desk, item {i}.",
            "dsc": " ".join(f"aspect{j}" for j in range(45)) + f" exhibit {i}.",
        },
    )
    for i in range(50)
]

# Token-length histogram per source, with an overflow bin.
hist = token_length_histogram(records, "ssc", bins=[0, 5, 15, 25, 50])
print("short-caption histogram bins:", list(zip(hist.bin_edges, hist.bin_edges[1:])))
print("counts:", hist.counts, "overflow:", hist.overflow)

# Unique entities per source over one paired sample: alt text tends to carry
# more distinct names than rewritten captions.
entities = entity_diversity(records, ["alt", "ssc"], sample_size=50, seed=7)
print("unique entities per source:", entities.per_source)
print("entity extraction example:", sorted(extract_entities(records[0].alt_text)))

# Assertions per caption: the offline rule-based splitter counts one claim
# per independent clause.
sample = "A red kite flies high and a child watches from below. The sky is clear."
print("assertions:", [a.text for a in extract_assertions(sample)])
report = ana(records, source="ssc")
print(f"mean assertions per short caption: {report.mean_assertions:.2f}")
