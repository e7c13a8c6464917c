"""Object-hallucination metrics for caption corpora.

Two complementary scores:

* **chair** — instance-level and sentence-level object hallucination against
  per-record ground-truth object sets: hallucinated instances over mentioned
  instances, and flagged sentences (containing at least one hallucinated
  instance) over total sentences.
* **capscore** — the percentage of caption-derived atomic assertions that a
  VQA provider verifies as true against the image (0..100).

Object mentions are detected with greedy longest-match over a replaceable
vocabulary of canonical objects plus a surface-form synonym table; the
packaged default is the classic 80-object detection vocabulary.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol

from .corpus import CaptionRecord
from .errors import MalformedSyntax, NoScorableRecords, ProviderFailure
from .richness import AssertionProvider, Source, _source_key, extract_assertions
from .textproc import split_sentences, tokenize

DEFAULT_VQA_QUESTION = "Based on the image, is this statement true? {assertion} Answer yes or no."

_IRREGULAR_PLURALS = {
    "people": "person",
    "men": "man",
    "women": "woman",
    "children": "child",
    "feet": "foot",
    "teeth": "tooth",
    "geese": "goose",
    "mice": "mouse",
    "knives": "knife",
    "leaves": "leaf",
    "wolves": "wolf",
    "loaves": "loaf",
    "shelves": "shelf",
    "scarves": "scarf",
}


def singularize(word: str) -> str:
    """Depluralize a casefolded word with fixed suffix rules plus an irregular table."""
    if word in _IRREGULAR_PLURALS:
        return _IRREGULAR_PLURALS[word]
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("ses", "xes", "zes", "ches", "shes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss") and len(word) > 3:
        return word[:-1]
    return word


@dataclass(frozen=True)
class ObjectVocabulary:
    """Canonical object names plus a surface-form synonym table.

    Surface forms are casefolded; every synonym maps to a canonical object.
    Multiword surfaces are supported and matched longest-first.
    """

    canonical_objects: frozenset[str]
    synonyms: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        canonical = frozenset(c.casefold().strip() for c in self.canonical_objects if c.strip())
        object.__setattr__(self, "canonical_objects", canonical)
        syn = {}
        for surface, target in self.synonyms.items():
            surface = surface.casefold().strip()
            target = target.casefold().strip()
            if target not in canonical:
                raise ValueError(f"synonym target {target!r} is not a canonical object")
            syn[surface] = target
        object.__setattr__(self, "synonyms", syn)
        index: dict[tuple[str, ...], str] = {}
        for name in canonical:
            index[tuple(tokenize(name).tokens)] = name
        for surface, target in syn.items():
            index[tuple(tokenize(surface).tokens)] = target
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_max_span", max((len(k) for k in index), default=0))

    def canonical_for(self, surface: str) -> str | None:
        surface = surface.casefold().strip()
        if surface in self.canonical_objects:
            return surface
        return self.synonyms.get(surface)

    @classmethod
    def from_files(
        cls, objects_path: str | Path, synonyms_path: str | Path | None = None
    ) -> "ObjectVocabulary":
        """Load from text files: one canonical object per line; synonyms as
        ``surface<TAB>canonical`` lines. Blank lines and ``#`` comments are skipped."""
        canonical = set()
        for line in Path(objects_path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                canonical.add(line)
        synonyms: dict[str, str] = {}
        if synonyms_path is not None:
            for n, line in enumerate(Path(synonyms_path).read_text(encoding="utf-8").splitlines(), 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise MalformedSyntax(
                        f"{synonyms_path}:{n}: expected 'surface<TAB>canonical'"
                    )
                synonyms[parts[0]] = parts[1]
        return cls(frozenset(canonical), synonyms)


_DEFAULT_VOCAB: ObjectVocabulary | None = None


def default_vocabulary() -> ObjectVocabulary:
    """The packaged 80-object vocabulary with its synonym table."""
    global _DEFAULT_VOCAB
    if _DEFAULT_VOCAB is None:
        data = resources.files("capmix.data")
        with resources.as_file(data / "coco_objects.txt") as objects_path, resources.as_file(
            data / "coco_synonyms.tsv"
        ) as synonyms_path:
            _DEFAULT_VOCAB = ObjectVocabulary.from_files(objects_path, synonyms_path)
    return _DEFAULT_VOCAB


def _scan_mentions(tokens: tuple[str, ...], vocab: ObjectVocabulary) -> list[str]:
    """Greedy longest-match scan mapping token spans to canonical objects.

    At each position the longest matching surface wins; the last word of a
    candidate span is also tried singularized, so plural mentions count.
    """
    index = vocab._index  # type: ignore[attr-defined]
    max_span = vocab._max_span  # type: ignore[attr-defined]
    mentions: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        matched = False
        for k in range(min(max_span, n - i), 0, -1):
            span = tokens[i : i + k]
            hit = index.get(span)
            if hit is None:
                hit = index.get(span[:-1] + (singularize(span[-1]),))
            if hit is not None:
                mentions.append(hit)
                i += k
                matched = True
                break
        if not matched:
            i += 1
    return mentions


def mentioned_objects(caption: str, vocab: ObjectVocabulary) -> Counter:
    """Multiset of canonical objects mentioned in a caption (instance counts)."""
    return Counter(_scan_mentions(tokenize(caption).tokens, vocab))


@dataclass(frozen=True)
class ChairReport:
    chair_i: float
    chair_s: float
    hallucinated_instances: int
    mentioned_instances: int
    flagged_sentences: int
    total_sentences: int
    records_scored: int
    records_skipped_no_gt: int
    records_skipped_missing_caption: int
    chair_i_undefined: bool
    chair_s_undefined: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def chair(
    records: Iterable[CaptionRecord],
    source: Source,
    vocab: ObjectVocabulary | None = None,
) -> ChairReport:
    """Corpus-level CHAIR scores for one caption source.

    A mentioned instance is hallucinated when its canonical object is not in
    the record's ``gt_objects``; a sentence is flagged when it contains at
    least one hallucinated instance. Records without ``gt_objects`` or
    without the requested caption are skipped and counted. Raises
    :class:`NoScorableRecords` when nothing can be scored.
    """
    vocab = vocab or default_vocabulary()
    key = _source_key(source)
    hallucinated = mentioned = flagged = total_sentences = 0
    scored = skipped_no_gt = skipped_missing = 0
    for record in records:
        caption = record.caption_text(key)
        if caption is None:
            skipped_missing += 1
            continue
        if record.gt_objects is None:
            skipped_no_gt += 1
            continue
        gt = {vocab.canonical_for(g) or g for g in record.gt_objects}
        scored += 1
        for sentence in split_sentences(caption):
            total_sentences += 1
            sentence_hallucinated = False
            for obj in _scan_mentions(tokenize(sentence).tokens, vocab):
                mentioned += 1
                if obj not in gt:
                    hallucinated += 1
                    sentence_hallucinated = True
            if sentence_hallucinated:
                flagged += 1
    if scored == 0:
        raise NoScorableRecords(
            f"no records carry both gt_objects and a {key!r} caption"
        )
    return ChairReport(
        chair_i=hallucinated / mentioned if mentioned else 0.0,
        chair_s=flagged / total_sentences if total_sentences else 0.0,
        hallucinated_instances=hallucinated,
        mentioned_instances=mentioned,
        flagged_sentences=flagged,
        total_sentences=total_sentences,
        records_scored=scored,
        records_skipped_no_gt=skipped_no_gt,
        records_skipped_missing_caption=skipped_missing,
        chair_i_undefined=mentioned == 0,
        chair_s_undefined=total_sentences == 0,
    )


# --------------------------------------------------------------------------
# CapScore
# --------------------------------------------------------------------------


class VqaProvider(Protocol):
    def ask(self, image_ref: str, question: str) -> str:
        """Returns "yes", "no", or "unparseable"."""
        ...


@dataclass(frozen=True)
class RecordCapScore:
    record_id: str
    assertions: int
    verified: int


@dataclass(frozen=True)
class CapScoreReport:
    capscore: float
    assertions_total: int
    assertions_verified: int
    assertions_unparseable: int
    records_scored: int
    records_skipped: int
    provider_failures: int
    undefined: bool
    partial: bool
    per_record: tuple[RecordCapScore, ...] | None = None

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        if self.per_record is not None:
            out["per_record"] = [dict(r.__dict__) for r in self.per_record]
        return out


def capscore(
    records: Iterable[CaptionRecord],
    source: Source,
    assertion_provider: AssertionProvider | None,
    vqa: VqaProvider,
    *,
    question_template: str = DEFAULT_VQA_QUESTION,
    on_provider_failure: str = "abort",
    include_details: bool = False,
) -> CapScoreReport:
    """Percentage of caption assertions the VQA provider verifies as true.

    Each assertion is posed to the VQA provider with the record's
    ``image_ref``; an assertion counts as verified only on a "yes" answer.
    ``on_provider_failure`` is "abort" (raise) or "skip" (flag the record,
    keep going, and mark the report partial). A corpus with zero assertions
    scores 0 with ``undefined`` set.
    """
    if on_provider_failure not in ("abort", "skip"):
        raise ValueError(f"on_provider_failure must be 'abort' or 'skip', got {on_provider_failure!r}")
    key = _source_key(source)
    total = verified = unparseable = 0
    scored = skipped = failures = 0
    details: list[RecordCapScore] = []
    for record in records:
        caption = record.caption_text(key)
        if caption is None:
            skipped += 1
            continue
        try:
            assertions = extract_assertions(caption, assertion_provider, caption_id=record.id)
            record_verified = 0
            for assertion in assertions:
                question = question_template.format(assertion=assertion.text)
                answer = vqa.ask(record.image_ref, question)
                if answer == "yes":
                    record_verified += 1
                elif answer == "unparseable":
                    unparseable += 1
        except ProviderFailure:
            if on_provider_failure == "abort":
                raise
            failures += 1
            continue
        scored += 1
        total += len(assertions)
        verified += record_verified
        if include_details:
            details.append(RecordCapScore(record.id, len(assertions), record_verified))
    return CapScoreReport(
        capscore=100.0 * verified / total if total else 0.0,
        assertions_total=total,
        assertions_verified=verified,
        assertions_unparseable=unparseable,
        records_scored=scored,
        records_skipped=skipped,
        provider_failures=failures,
        undefined=total == 0,
        partial=failures > 0,
        per_record=tuple(details) if include_details else None,
    )
