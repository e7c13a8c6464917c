"""Richness and diversity analytics: token-length histograms, unique entities, assertions.

All metrics are fold operations over record streams: partial tallies merge
associatively, so shard-parallel workers can combine results. Assertion
extraction ships with a deterministic rule-based fallback so every metric is
testable offline; a remote LLM provider can be plugged in for fidelity.
"""

from __future__ import annotations

import csv
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence, Union

from .corpus import CaptionRecord
from .errors import ProviderFailure
from .formats import CaptionFormat
from .textproc import DEFAULT_SCHEME, STOPWORDS, count_tokens, split_sentences

Source = Union[str, CaptionFormat]

DEFAULT_BIN_WIDTH = 5
DEFAULT_MAX_EDGE = 200


def _source_key(source: Source) -> str:
    return source.value if isinstance(source, CaptionFormat) else source


# --------------------------------------------------------------------------
# Token-length histograms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    """Left-inclusive histogram of token lengths for one caption source.

    ``counts[i]`` covers ``[bin_edges[i], bin_edges[i+1])``. Values at or
    above the last edge land in ``overflow``; values below the first edge in
    ``underflow``. ``skipped`` tallies records that lack the requested
    source, so ``total + skipped`` equals records seen.
    """

    source: str
    bin_edges: tuple[int, ...]
    counts: tuple[int, ...]
    underflow: int
    overflow: int
    skipped: int

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow

    def merge(self, other: "Histogram") -> "Histogram":
        """Combine partial tallies from parallel workers (same source and edges)."""
        if other.source != self.source or other.bin_edges != self.bin_edges:
            raise ValueError("can only merge histograms with identical source and edges")
        return Histogram(
            self.source,
            self.bin_edges,
            tuple(a + b for a, b in zip(self.counts, other.counts)),
            self.underflow + other.underflow,
            self.overflow + other.overflow,
            self.skipped + other.skipped,
        )

    def csv_rows(self) -> list[tuple]:
        rows: list[tuple] = [("bin_start", "bin_end", "count")]
        if self.underflow:
            rows.append(("", self.bin_edges[0], self.underflow))
        for i, count in enumerate(self.counts):
            rows.append((self.bin_edges[i], self.bin_edges[i + 1], count))
        rows.append((self.bin_edges[-1], "", self.overflow))
        return rows

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerows(self.csv_rows())


def _resolve_edges(bins: int | Sequence[int] | None) -> tuple[int, ...]:
    if bins is None:
        return tuple(range(0, DEFAULT_MAX_EDGE + 1, DEFAULT_BIN_WIDTH))
    if isinstance(bins, int):
        if bins < 1:
            raise ValueError(f"bins must be >= 1, got {bins}")
        return tuple(range(0, (bins + 1) * DEFAULT_BIN_WIDTH, DEFAULT_BIN_WIDTH))
    edges = tuple(int(e) for e in bins)
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be at least two strictly ascending integers")
    return edges


def token_length_histogram(
    records: Iterable[CaptionRecord],
    source: Source,
    bins: int | Sequence[int] | None = None,
    scheme: str = DEFAULT_SCHEME,
) -> Histogram:
    """Histogram token lengths of the given caption source across a stream.

    ``bins`` is either a bin count (width-5 bins from zero), an explicit
    ascending edge list, or None for the default 0..200 width-5 grid with an
    overflow bin.
    """
    key = _source_key(source)
    edges = _resolve_edges(bins)
    counts = [0] * (len(edges) - 1)
    underflow = overflow = skipped = 0
    for record in records:
        text = record.caption_text(key)
        if text is None:
            skipped += 1
            continue
        n = count_tokens(text, scheme)
        if n < edges[0]:
            underflow += 1
        elif n >= edges[-1]:
            overflow += 1
        else:
            lo, hi = 0, len(counts)
            while lo + 1 < hi:  # last edge e with e <= n
                mid = (lo + hi) // 2
                if edges[mid] <= n:
                    lo = mid
                else:
                    hi = mid
            counts[lo] += 1
    return Histogram(key, edges, tuple(counts), underflow, overflow, skipped)


# --------------------------------------------------------------------------
# Entity extraction and diversity
# --------------------------------------------------------------------------

# Words that may not *start* an entity span: function words plus the
# imperative/boilerplate openers common in web alt text. Capitalized words
# inside a span (e.g. brand names like "Winnie The Pooh") are unaffected.
SPAN_SKIP_WORDS = STOPWORDS | frozenset(
    {"buy", "shop", "get", "find", "view", "see", "visit", "order",
     "photo", "image", "picture", "pictured", "shown"}
)

EntityExtractor = Callable[[str], Iterable[str]]


def _strip_edges(token: str) -> tuple[str, bool, bool]:
    """Strip non-alphanumeric edges; report whether either edge had punctuation."""
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end], start > 0, end < len(token)


def _entity_eligible(word: str) -> bool:
    if any(c.isdigit() for c in word):
        return True
    return len(word) > 1 and word[0].isupper()


def entity_spans(text: str) -> list[str]:
    """Maximal entity spans in original casing.

    A span is an uninterrupted run of capitalized words (length >= 2) and
    digit-containing tokens; punctuation breaks spans; a span may not start
    with a word from :data:`SPAN_SKIP_WORDS`. Re-extracting from the spans
    themselves yields the same entities (idempotence).
    """
    spans: list[str] = []
    current: list[str] = []

    def flush() -> None:
        if current:
            spans.append(" ".join(current))
            current.clear()

    for raw in text.split():
        word, lead_punct, trail_punct = _strip_edges(raw)
        if lead_punct:
            flush()
        if word and _entity_eligible(word) and (current or word.casefold() not in SPAN_SKIP_WORDS):
            current.append(word)
        else:
            flush()
        if trail_punct:
            flush()
    flush()
    return spans


def extract_entities(caption: str, extractor: EntityExtractor | None = None) -> frozenset[str]:
    """Normalized entity strings in a caption (casefolded for set semantics).

    The default heuristic is :func:`entity_spans`; pass a provider-backed
    callable for model-based extraction (its :class:`ProviderFailure` errors
    propagate).
    """
    if extractor is None:
        raw: Iterable[str] = entity_spans(caption)
    else:
        raw = extractor(caption)
    return frozenset(e.casefold().strip() for e in raw if e and e.strip())


@dataclass(frozen=True)
class EntityReport:
    """Unique-entity counts per caption source over one paired record sample."""

    per_source: dict[str, int]
    sample_size: int
    seed: int
    entity_sets: dict[str, frozenset[str]] | None = None


def entity_diversity(
    records: Iterable[CaptionRecord],
    sources: Sequence[Source],
    *,
    sample_size: int,
    seed: int,
    extractor: EntityExtractor | None = None,
    retain_sets: bool = False,
) -> EntityReport:
    """Unique-entity counts per source over a seeded random sample of records.

    Every source is evaluated on the identical sampled records (paired
    comparison); the same seed over the same stream yields the same sample.
    A sample size larger than the corpus uses the full corpus.
    """
    if sample_size < 1:
        raise ValueError(f"sample_size must be >= 1, got {sample_size}")
    keys = [_source_key(s) for s in sources]
    rng = random.Random(seed)
    reservoir: list[CaptionRecord] = []
    for index, record in enumerate(records):
        if index < sample_size:
            reservoir.append(record)
        else:
            j = rng.randint(0, index)
            if j < sample_size:
                reservoir[j] = record
    sets: dict[str, set[str]] = {k: set() for k in keys}
    for record in reservoir:
        for key in keys:
            text = record.caption_text(key)
            if text is not None:
                sets[key].update(extract_entities(text, extractor))
    return EntityReport(
        per_source={k: len(sets[k]) for k in keys},
        sample_size=len(reservoir),
        seed=seed,
        entity_sets={k: frozenset(v) for k, v in sets.items()} if retain_sets else None,
    )


# --------------------------------------------------------------------------
# Assertions and ANA
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Assertion:
    """A single atomic factual claim extracted from a caption."""

    text: str
    source_caption_id: str = ""


class AssertionProvider(Protocol):
    def assertions(self, caption: str) -> list[str]: ...


# Default prompt for remote assertion providers; editable at the client.
ASSERTION_PROMPT = "List each atomic factual claim in the caption, one per line.\n\nCaption: {caption}"

_AUX_VERBS = frozenset(
    """
    is are was were be been being am has have had do does did can could will
    would may might must shall should seems seem appears appear looks look
    """.split()
)

_COORDINATORS = re.compile(r",\s+and\s+|\s+and\s+|,\s+")
_WORDS = re.compile(r"\w+")


def _looks_like_clause(segment: str) -> bool:
    """Heuristic finite-clause test used by the rule-based assertion splitter.

    A segment qualifies when it has at least three word tokens and contains a
    verb cue: an auxiliary/copula, or a non-initial content token of length
    >= 4 ending in -s/-ed/-ing.
    """
    words = [w.lower() for w in _WORDS.findall(segment)]
    if len(words) < 3:
        return False
    content = [w for w in words if w not in STOPWORDS]
    if any(w in _AUX_VERBS for w in words):
        return True
    for w in content[1:]:
        if len(w) >= 4 and w.endswith(("s", "ed", "ing")):
            return True
    return False


def _split_clauses(sentence: str) -> list[str]:
    parts: list[str] = []
    start = 0
    for match in _COORDINATORS.finditer(sentence):
        left = sentence[start : match.start()]
        rest = sentence[match.end() :]
        if _looks_like_clause(left) and _looks_like_clause(rest):
            parts.append(left.strip())
            start = match.end()
    tail = sentence[start:].strip()
    if tail:
        parts.append(tail)
    return parts


def rule_based_assertions(caption: str) -> list[str]:
    """Offline assertion extraction: one assertion per independent clause.

    Sentences split on terminal punctuation; within a sentence, coordinated
    finite clauses (joined by "and" or commas) split when both sides pass
    :func:`_looks_like_clause`.
    """
    out: list[str] = []
    for sentence in split_sentences(caption):
        out.extend(_split_clauses(sentence))
    return out


def extract_assertions(
    caption: str,
    provider: AssertionProvider | None = None,
    *,
    caption_id: str = "",
) -> list[Assertion]:
    """Atomic assertions for a caption; empty caption yields an empty list.

    ``provider=None`` selects the deterministic rule-based fallback. A remote
    provider's list is taken verbatim, order-preserving deduplicated.
    """
    if not caption or not caption.strip():
        return []
    if provider is None:
        texts = rule_based_assertions(caption)
    else:
        texts = provider.assertions(caption)
    seen: set[str] = set()
    out: list[Assertion] = []
    for text in texts:
        text = text.strip()
        if text and text not in seen:
            seen.add(text)
            out.append(Assertion(text, caption_id))
    return out


@dataclass(frozen=True)
class SourceAna:
    captions: int
    assertions: int

    @property
    def mean(self) -> float:
        return self.assertions / self.captions if self.captions else 0.0


@dataclass(frozen=True)
class AnaReport:
    """Average number of assertions per caption, with a per-source breakdown."""

    mean_assertions: float
    per_source: dict[str, SourceAna]
    captions_total: int
    assertions_total: int
    undefined: bool = False
    partial: bool = False


def ana(
    records: Iterable[CaptionRecord],
    *,
    source: Source | None = None,
    provider: AssertionProvider | None = None,
) -> AnaReport:
    """Mean assertions per caption for one source, or a per-source table for all.

    An empty corpus reports 0 with ``undefined`` set. A provider failure
    aborts the scan and returns the partial tallies with ``partial`` set.
    """
    if source is not None:
        keys = [_source_key(source)]
    else:
        keys = [CaptionFormat.ALT_TEXT.value] + [f.value for f in CaptionFormat if f.value != "alt"]
    tallies = {k: [0, 0] for k in keys}  # captions, assertions
    partial = False
    try:
        for record in records:
            for key in keys:
                text = record.caption_text(key)
                if text is None:
                    continue
                n = len(extract_assertions(text, provider, caption_id=record.id))
                tallies[key][0] += 1
                tallies[key][1] += n
    except ProviderFailure:
        partial = True
    per_source = {k: SourceAna(c, a) for k, (c, a) in tallies.items() if c or source is not None}
    captions_total = sum(v.captions for v in per_source.values())
    assertions_total = sum(v.assertions for v in per_source.values())
    mean = assertions_total / captions_total if captions_total else 0.0
    return AnaReport(
        mean_assertions=mean,
        per_source=per_source,
        captions_total=captions_total,
        assertions_total=assertions_total,
        undefined=captions_total == 0,
        partial=partial,
    )
