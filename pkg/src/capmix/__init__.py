"""capmix: streaming curation toolkit for image-caption corpora.

Core surface: corpus I/O (:mod:`capmix.corpus`), tokenization
(:mod:`capmix.textproc`), caption format contracts (:mod:`capmix.formats`),
richness/diversity metrics (:mod:`capmix.richness`), hallucination metrics
(:mod:`capmix.hallucination`), and dataset mixing (:mod:`capmix.mixer`).
Provider clients and the mock HTTP server live in :mod:`capmix.providers`
and :mod:`capmix.mockserver` and are imported on demand.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .corpus import (
    CaptionRecord,
    DatasetManifest,
    RecordError,
    Shard,
    load_manifest,
    parse_record,
    read_records,
    save_manifest,
    serialize_record,
    stream_manifest,
    write_shard,
)
from .formats import (
    CaptionFormat,
    FormatSpec,
    ValidationReport,
    classify,
    default_specs,
    validate,
)
from .hallucination import (
    CapScoreReport,
    ChairReport,
    ObjectVocabulary,
    capscore,
    chair,
    default_vocabulary,
    mentioned_objects,
)
from .mixer import (
    MixRecipe,
    MixReport,
    assign_source,
    mix_corpus,
    sweep,
    training_text,
    truncate_for_budget,
)
from .richness import (
    AnaReport,
    Assertion,
    EntityReport,
    Histogram,
    ana,
    entity_diversity,
    extract_assertions,
    extract_entities,
    token_length_histogram,
)
from .textproc import (
    DEFAULT_SCHEME,
    SentenceSplit,
    TokenSequence,
    count_tokens,
    fits_budget,
    register_scheme,
    split_sentences,
    tokenize,
)

__all__ = [
    "__version__",
    "CaptionRecord",
    "DatasetManifest",
    "RecordError",
    "Shard",
    "load_manifest",
    "parse_record",
    "read_records",
    "save_manifest",
    "serialize_record",
    "stream_manifest",
    "write_shard",
    "CaptionFormat",
    "FormatSpec",
    "ValidationReport",
    "classify",
    "default_specs",
    "validate",
    "CapScoreReport",
    "ChairReport",
    "ObjectVocabulary",
    "capscore",
    "chair",
    "default_vocabulary",
    "mentioned_objects",
    "MixRecipe",
    "MixReport",
    "assign_source",
    "mix_corpus",
    "sweep",
    "training_text",
    "truncate_for_budget",
    "AnaReport",
    "Assertion",
    "EntityReport",
    "Histogram",
    "ana",
    "entity_diversity",
    "extract_assertions",
    "extract_entities",
    "token_length_histogram",
    "DEFAULT_SCHEME",
    "SentenceSplit",
    "TokenSequence",
    "count_tokens",
    "fits_budget",
    "register_scheme",
    "split_sentences",
    "tokenize",
]
