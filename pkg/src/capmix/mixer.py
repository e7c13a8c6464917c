"""Materialize training datasets from caption-mixing recipes.

Three modes:

* ``ratio_sample`` — per-record Bernoulli choice between two sources; the
  alt ratio ``p`` is the probability of the first source (by convention alt
  text). Assignment hashes (seed, record id), so it is reproducible,
  independent of iteration order and worker count, and monotone across
  ratios: the ids assigned to the first source at a lower ratio are a subset
  of those at any higher ratio under the same seed.
* ``concat`` — join two or more sources into a single training text.
* ``union_uniform`` — uniform per-record choice among the available sources.

Materialized records keep ``id`` and ``image_ref``; the chosen training text
lands in its originating slot (``alt_text`` for alt, the format key for a
synthetic source), while concatenations go to ``alt_text`` as the free-text
slot. ``meta["mix_source"]`` always records provenance.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .corpus import (
    CaptionRecord,
    DatasetManifest,
    RecordError,
    Shard,
    save_manifest,
    stream_manifest,
    write_shard,
)
from .errors import MissingSource
from .formats import CaptionFormat
from .textproc import DEFAULT_SCHEME, token_spans

_MASK64 = (1 << 64) - 1
_SCALE = float(1 << 64)

MODES = ("ratio_sample", "concat", "union_uniform")
MISSING_POLICIES = ("skip_record", "fallback_other_source", "error")

ALT = CaptionFormat.ALT_TEXT.value
_VALID_SOURCES = frozenset({ALT} | {f.value for f in CaptionFormat})


@dataclass(frozen=True)
class MixRecipe:
    """A mixing mode plus everything needed to reproduce its output."""

    mode: str
    sources: tuple[str, ...]
    seed: int
    alt_ratio: float | None = None
    missing_policy: str = "fallback_other_source"
    budget: int | None = None
    separator: str = " "
    scheme: str = DEFAULT_SCHEME

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.missing_policy not in MISSING_POLICIES:
            raise ValueError(f"missing_policy must be one of {MISSING_POLICIES}")
        sources = tuple(self.sources)
        object.__setattr__(self, "sources", sources)
        unknown = [s for s in sources if s not in _VALID_SOURCES]
        if unknown:
            raise ValueError(f"unknown caption sources: {unknown}")
        if len(set(sources)) != len(sources):
            raise ValueError("sources must be distinct")
        if self.mode == "ratio_sample":
            if len(sources) != 2:
                raise ValueError("ratio_sample requires exactly 2 sources")
            if self.alt_ratio is None or not 0.0 <= self.alt_ratio <= 1.0:
                raise ValueError("ratio_sample requires alt_ratio in [0, 1]")
        elif self.mode == "concat":
            if len(sources) < 2:
                raise ValueError("concat requires at least 2 sources")
        elif not sources:
            raise ValueError("union_uniform requires at least 1 source")
        if self.budget is not None and self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "sources": list(self.sources),
            "seed": self.seed,
            "alt_ratio": self.alt_ratio,
            "missing_policy": self.missing_policy,
            "budget": self.budget,
            "separator": self.separator,
            "scheme": self.scheme,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixRecipe":
        return cls(
            mode=data["mode"],
            sources=tuple(data["sources"]),
            seed=int(data.get("seed", 0)),
            alt_ratio=data.get("alt_ratio"),
            missing_policy=data.get("missing_policy", "fallback_other_source"),
            budget=data.get("budget"),
            separator=data.get("separator", " "),
            scheme=data.get("scheme", DEFAULT_SCHEME),
        )


def _unit_interval(seed: int, record_id: str) -> float:
    """Stable hash of (seed, record id) mapped to [0, 1)."""
    digest = hashlib.blake2b(
        record_id.encode("utf-8"),
        digest_size=8,
        key=(seed & _MASK64).to_bytes(8, "little"),
    ).digest()
    return int.from_bytes(digest, "big") / _SCALE


def assign_source(record_id: str, recipe: MixRecipe) -> str:
    """The source a ratio_sample recipe draws for this record id.

    Pure function of (id, seed, alt_ratio): the first source wins iff the
    hashed unit value is below ``alt_ratio``. Endpoints are exact — every id
    at ``p=1``, none at ``p=0``.
    """
    if recipe.mode != "ratio_sample":
        raise ValueError("assign_source applies to ratio_sample recipes only")
    u = _unit_interval(recipe.seed, record_id)
    return recipe.sources[0] if u < recipe.alt_ratio else recipe.sources[1]


def truncate_for_budget(text: str, budget: int, scheme: str = DEFAULT_SCHEME) -> tuple[str, bool]:
    """Longest whole-token prefix within the budget, plus whether it truncated.

    Idempotent: re-truncating the result under the same budget is a no-op.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    spans = token_spans(text, scheme)
    if len(spans) <= budget:
        return text, False
    return text[: spans[budget - 1][1]], True


@dataclass
class MixReport:
    """Accounting for one materialization; merges associatively across shards."""

    recipe: dict
    emitted_by_source: dict[str, int] = field(default_factory=dict)
    records_in: int = 0
    emitted: int = 0
    skipped: int = 0
    fallbacks: int = 0
    truncated: int = 0
    input_errors: int = 0

    @property
    def observed_alt_fraction(self) -> float:
        if not self.emitted:
            return 0.0
        alt_side = self.recipe["sources"][0] if self.recipe["mode"] == "ratio_sample" else ALT
        return self.emitted_by_source.get(alt_side, 0) / self.emitted

    @property
    def seed(self) -> int:
        return self.recipe["seed"]

    def merge(self, other: "MixReport") -> "MixReport":
        combined = dict(self.emitted_by_source)
        for k, v in other.emitted_by_source.items():
            combined[k] = combined.get(k, 0) + v
        return MixReport(
            recipe=self.recipe,
            emitted_by_source=combined,
            records_in=self.records_in + other.records_in,
            emitted=self.emitted + other.emitted,
            skipped=self.skipped + other.skipped,
            fallbacks=self.fallbacks + other.fallbacks,
            truncated=self.truncated + other.truncated,
            input_errors=self.input_errors + other.input_errors,
        )

    def to_dict(self) -> dict:
        return {
            "recipe": self.recipe,
            "emitted_by_source": dict(sorted(self.emitted_by_source.items())),
            "records_in": self.records_in,
            "emitted": self.emitted,
            "skipped": self.skipped,
            "fallbacks": self.fallbacks,
            "truncated": self.truncated,
            "input_errors": self.input_errors,
            "observed_alt_fraction": self.observed_alt_fraction,
            "seed": self.seed,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _choose_union(record_id: str, recipe: MixRecipe, available: list[str]) -> str:
    u = _unit_interval(recipe.seed, record_id)
    index = min(int(u * len(available)), len(available) - 1)
    return available[index]


def mix_record(record: CaptionRecord, recipe: MixRecipe) -> tuple[CaptionRecord | None, dict]:
    """Apply a recipe to one record.

    Returns (materialized record or None when skipped, tally dict with keys
    source/fallback/truncated). Raises :class:`MissingSource` only under the
    ``error`` missing policy.
    """
    tally = {"source": None, "fallback": False, "truncated": False}
    meta: dict[str, str] = {}

    if recipe.mode == "concat":
        parts = [(s, record.caption_text(s)) for s in recipe.sources]
        missing = [s for s, t in parts if t is None]
        if missing:
            if recipe.missing_policy == "error":
                raise MissingSource(record.id, missing[0])
            if recipe.missing_policy == "skip_record" or all(t is None for _, t in parts):
                return None, tally
            tally["fallback"] = True
        used = [(s, t) for s, t in parts if t is not None]
        text = recipe.separator.join(t for _, t in used)
        label = "concat"
        meta["mix_sources"] = "+".join(s for s, _ in used)
    else:
        if recipe.mode == "ratio_sample":
            want = assign_source(record.id, recipe)
            text = record.caption_text(want)
            label = want
            if text is None:
                if recipe.missing_policy == "error":
                    raise MissingSource(record.id, want)
                if recipe.missing_policy == "skip_record":
                    return None, tally
                other = recipe.sources[1] if want == recipe.sources[0] else recipe.sources[0]
                text = record.caption_text(other)
                if text is None:
                    return None, tally
                label = other
                tally["fallback"] = True
        else:  # union_uniform
            available = [s for s in recipe.sources if record.caption_text(s) is not None]
            missing = [s for s in recipe.sources if record.caption_text(s) is None]
            if missing and recipe.missing_policy == "error":
                raise MissingSource(record.id, missing[0])
            if not available or (missing and recipe.missing_policy == "skip_record"):
                return None, tally
            if missing:
                tally["fallback"] = True
            label = _choose_union(record.id, recipe, available)
            text = record.caption_text(label)

    if recipe.budget is not None:
        text, was_truncated = truncate_for_budget(text, recipe.budget, recipe.scheme)
        if was_truncated:
            tally["truncated"] = True
            meta["mix_truncated"] = "true"

    meta["mix_source"] = label
    if tally["fallback"]:
        meta["mix_fallback"] = "true"
    if label != "concat" and label != ALT:
        out = CaptionRecord(record.id, record.image_ref, captions={label: text}, meta=meta)
    else:
        out = CaptionRecord(record.id, record.image_ref, alt_text=text, meta=meta)
    tally["source"] = label
    return out, tally


def training_text(record: CaptionRecord) -> str:
    """The materialized training caption of a mixed record."""
    if record.alt_text is not None:
        return record.alt_text
    return next(iter(record.captions.values()))


def _mix_stream(
    events: Iterable, recipe: MixRecipe, report: MixReport
) -> Iterator[CaptionRecord]:
    for event in events:
        if isinstance(event, RecordError):
            report.input_errors += 1
            continue
        report.records_in += 1
        out, tally = mix_record(event, recipe)
        if out is None:
            report.skipped += 1
            continue
        source = tally["source"]
        report.emitted += 1
        report.emitted_by_source[source] = report.emitted_by_source.get(source, 0) + 1
        if tally["fallback"]:
            report.fallbacks += 1
        if tally["truncated"]:
            report.truncated += 1
        yield out


def _mix_one_shard(
    shard: Shard, index: int, recipe: MixRecipe, out_dir: Path, max_records: int | None
) -> tuple[list[Shard], MixReport]:
    report = MixReport(recipe=recipe.to_dict())
    events = stream_manifest(DatasetManifest(shards=[shard]))
    shards = write_shard(
        _mix_stream(events, recipe, report),
        out_dir / f"part-{index:05d}.jsonl",
        max_records,
    )
    return shards, report


def mix_corpus(
    manifest: DatasetManifest,
    recipe: MixRecipe,
    out_dir: str | Path,
    *,
    max_records_per_shard: int | None = None,
    workers: int = 1,
) -> tuple[DatasetManifest, MixReport]:
    """Materialize a training dataset under a recipe, shard by shard.

    Each input shard maps to its own output shard group, so the result is
    byte-identical for any worker count. Writes ``manifest.json`` and
    ``mix_report.json`` into ``out_dir`` and returns both objects.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results: list[tuple[list[Shard], MixReport]]
    if workers > 1 and len(manifest.shards) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_mix_one_shard, shard, i, recipe, out_dir, max_records_per_shard)
                for i, shard in enumerate(manifest.shards)
            ]
            results = [f.result() for f in futures]
    else:
        results = [
            _mix_one_shard(shard, i, recipe, out_dir, max_records_per_shard)
            for i, shard in enumerate(manifest.shards)
        ]
    all_shards: list[Shard] = []
    report = MixReport(recipe=recipe.to_dict())
    for shards, partial in results:
        all_shards.extend(shards)
        report = report.merge(partial)
    out_manifest = DatasetManifest(shards=all_shards)
    save_manifest(out_manifest, out_dir / "manifest.json")
    report.save(out_dir / "mix_report.json")
    return out_manifest, report


def ratio_dir_name(ratio: float) -> str:
    return f"ratio_{round(ratio * 100):03d}"


def sweep(
    manifest: DatasetManifest,
    base_recipe: MixRecipe,
    ratios: Sequence[float],
    out_root: str | Path,
    *,
    max_records_per_shard: int | None = None,
    workers: int = 1,
) -> list[tuple[float, MixReport]]:
    """One dataset variant per ratio, all under the same seed.

    Variants are paired: a record keeps the identical synthetic caption in
    every variant where the synthetic side is chosen, and the set of ids
    assigned to the alt side grows monotonically with the ratio. Output
    directories are named ``ratio_000`` .. ``ratio_100`` by percentage.
    """
    if not ratios:
        raise ValueError("ratios must be non-empty")
    if any(not 0.0 <= r <= 1.0 for r in ratios):
        raise ValueError("every ratio must be in [0, 1]")
    if base_recipe.mode != "ratio_sample":
        raise ValueError("sweep requires a ratio_sample recipe")
    out_root = Path(out_root)
    results = []
    for ratio in ratios:
        recipe = replace(base_recipe, alt_ratio=ratio)
        _, report = mix_corpus(
            manifest,
            recipe,
            out_root / ratio_dir_name(ratio),
            max_records_per_shard=max_records_per_shard,
            workers=workers,
        )
        results.append((ratio, report))
    return results
