"""Clients for external captioner / assertion-LLM / VQA providers, plus mocks.

Wire protocol: JSON over HTTP. Every request is ``{"id", "image_ref",
"prompt"}`` (``image_b64`` added when byte inlining is enabled and the image
ref is a readable file); every response is ``{"id", "text"}``. Endpoints:
``/caption``, ``/assert``, ``/vqa``. API keys come from an environment
variable named in the endpoint config and travel as a bearer token.

Requests are retried on 429/5xx/transport errors with exponential backoff
(base doubles per attempt, plus up to one extra base of jitter, capped),
rate-limited to ``rate_limit_per_s``, and fanned out under a hard
``max_in_flight`` bound.

The in-process mocks at the bottom speak the same client interfaces so every
metric and pipeline stage runs deterministically offline.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .corpus import (
    CaptionRecord,
    DatasetManifest,
    Shard,
    read_records,
    save_manifest,
    write_shard,
)
from .errors import (
    EmptyCaption,
    MissingAltText,
    ProviderFailure,
    TemplateError,
)
from .formats import CaptionFormat, FormatSpec, validate
from .hallucination import singularize
from .richness import rule_based_assertions
from .textproc import DEFAULT_SCHEME, STOPWORDS, tokenize

log = logging.getLogger(__name__)

BACKOFF_CAP_MS = 30_000
_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})

# Per-format prompt templates; placeholders {alt_text} and {ocr_text} are
# rendered from the record. Editable via config.
PROMPT_TEMPLATES: dict[CaptionFormat, str] = {
    CaptionFormat.SSC: "Describe the image in one concise sentence.",
    CaptionFormat.DSC: "Describe the image in detail in at most 78 tokens.",
    CaptionFormat.DSC_PLUS: "Describe the image comprehensively, including background and setting.",
    CaptionFormat.AFC: "Describe the image in detail; integrate this alt-text where accurate: {alt_text}",
}

# Boilerplate openers stripped before format validation.
BOILERPLATE_PREFIXES: tuple[str, ...] = (
    "the image shows",
    "the image depicts",
    "the image features",
    "this image shows",
    "this is a photo of",
    "this is an image of",
    "this is a picture of",
    "the photo shows",
    "the picture shows",
    "in this image,",
    "in this image",
)


@dataclass(frozen=True)
class ProviderEndpoint:
    """Connection and resilience settings for one provider service."""

    base_url: str
    api_key_env: str = ""
    max_in_flight: int = 4
    max_retries: int = 3
    backoff_base_ms: int = 250
    timeout_ms: int = 30_000
    rate_limit_per_s: float = 0.0  # 0 disables rate limiting
    inline_image_bytes: bool = False

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.backoff_base_ms < 0:
            raise ValueError("backoff_base_ms must be >= 0")
        if self.rate_limit_per_s < 0:
            raise ValueError("rate_limit_per_s must be >= 0")


class _RateLimiter:
    """Serializes request starts to at most ``rate`` per second."""

    def __init__(self, rate: float):
        self._interval = 1.0 / rate if rate > 0 else 0.0
        self._lock = threading.Lock()
        self._next_start = 0.0

    def acquire(self) -> None:
        if self._interval == 0.0:
            return
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next_start)
            self._next_start = start + self._interval
        delay = start - now
        if delay > 0:
            time.sleep(delay)


def parse_yes_no(text: str) -> str:
    """Classify a provider answer by the first standalone yes/no token."""
    for token in tokenize(text):
        if token == "yes":
            return "yes"
        if token == "no":
            return "no"
    return "unparseable"


def render_prompt(template: str, record: CaptionRecord) -> str:
    """Fill {alt_text}/{ocr_text} placeholders from the record."""
    values = {"alt_text": record.alt_text or "", "ocr_text": record.ocr_text or ""}
    try:
        return template.format(**values)
    except (KeyError, IndexError, ValueError) as e:
        raise TemplateError(f"cannot render prompt template: {e}") from None


class HttpProviderClient:
    """Shared HTTP machinery: one bounded, retrying, rate-limited endpoint."""

    def __init__(self, endpoint: ProviderEndpoint):
        import httpx

        self.endpoint = endpoint
        self._limiter = _RateLimiter(endpoint.rate_limit_per_s)
        headers = {}
        key = os.environ.get(endpoint.api_key_env) if endpoint.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            base_url=endpoint.base_url.rstrip("/"),
            timeout=endpoint.timeout_ms / 1000.0,
            headers=headers,
        )
        self._rng = random.Random()

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _backoff_seconds(self, attempt: int) -> float:
        base = min(self.endpoint.backoff_base_ms * (2**attempt), BACKOFF_CAP_MS)
        return (base + self._rng.uniform(0, base)) / 1000.0

    def post_json(self, path: str, payload: dict) -> dict:
        import httpx

        attempts = self.endpoint.max_retries + 1
        request_id = str(payload.get("id", ""))
        last_error = "unknown error"
        for attempt in range(attempts):
            self._limiter.acquire()
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as e:
                last_error = f"transport error: {e}"
            else:
                if response.status_code == 200:
                    try:
                        body = response.json()
                    except ValueError:
                        raise ProviderFailure(
                            f"{path}: response is not JSON", request_id
                        ) from None
                    if not isinstance(body, dict) or "text" not in body:
                        raise ProviderFailure(f"{path}: response missing 'text'", request_id)
                    return body
                last_error = f"HTTP {response.status_code}"
                if response.status_code not in _RETRYABLE_STATUSES:
                    raise ProviderFailure(f"{path}: {last_error}", request_id)
            if attempt + 1 < attempts:
                delay = self._backoff_seconds(attempt)
                log.debug("retrying %s for id=%s in %.3fs (%s)", path, request_id, delay, last_error)
                time.sleep(delay)
        raise ProviderFailure(
            f"{path}: giving up after {attempts} attempts ({last_error})", request_id
        )


class CaptionClient(HttpProviderClient):
    def caption(self, record_id: str, image_ref: str, prompt: str, fmt: CaptionFormat | None = None) -> str:
        payload = {"id": record_id, "image_ref": image_ref, "prompt": prompt}
        if self.endpoint.inline_image_bytes:
            path = Path(image_ref)
            if path.is_file():
                payload["image_b64"] = base64.b64encode(path.read_bytes()).decode("ascii")
        return str(self.post_json("/caption", payload)["text"])


class AssertionClient(HttpProviderClient):
    """Remote assertion extraction; satisfies richness.AssertionProvider."""

    prompt_template: str = "List each atomic factual claim in the caption, one per line.\n\nCaption: {caption}"

    def assertions(self, caption: str) -> list[str]:
        prompt = self.prompt_template.format(caption=caption)
        text = str(self.post_json("/assert", {"id": "", "image_ref": "", "prompt": prompt})["text"])
        return [line.strip() for line in text.splitlines() if line.strip()]


class VqaClient(HttpProviderClient):
    """Remote VQA; satisfies hallucination.VqaProvider."""

    def ask(self, image_ref: str, question: str) -> str:
        body = self.post_json("/vqa", {"id": "", "image_ref": image_ref, "prompt": question})
        return parse_yes_no(str(body["text"]))


def vqa_ask(image_ref: str, question: str, endpoint: ProviderEndpoint) -> str:
    """One-shot VQA query against an endpoint; returns yes/no/unparseable."""
    with VqaClient(endpoint) as client:
        return client.ask(image_ref, question)


# --------------------------------------------------------------------------
# Recaptioning
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RecaptionResult:
    record_id: str
    caption: str | None
    error: Exception | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def recaption_batch(
    records: Iterable[CaptionRecord],
    fmt: CaptionFormat,
    client,
    templates: dict[CaptionFormat, str] | None = None,
    *,
    done_ids: set[str] | None = None,
) -> Iterator[RecaptionResult]:
    """Request one caption of ``fmt`` per record, fanned out under the client's
    in-flight bound; results stream back keyed by id as they complete.

    Records whose ids appear in ``done_ids`` are skipped entirely, so re-runs
    over a partial output never duplicate work. Alt-fusion requests without
    alt text surface as :class:`MissingAltText` error results; provider
    failures surface per record instead of aborting the batch.
    """
    templates = templates or PROMPT_TEMPLATES
    done = done_ids or set()
    template = templates.get(fmt)
    if template is None:
        raise TemplateError(f"no prompt template for format {fmt.value!r}")
    max_workers = getattr(getattr(client, "endpoint", None), "max_in_flight", 1)

    def one(record: CaptionRecord) -> RecaptionResult:
        if fmt is CaptionFormat.AFC and not record.alt_text:
            return RecaptionResult(record.id, None, MissingAltText(record.id))
        try:
            prompt = render_prompt(template, record)
            caption = client.caption(record.id, record.image_ref, prompt, fmt)
        except (ProviderFailure, TemplateError) as e:
            return RecaptionResult(record.id, None, e)
        return RecaptionResult(record.id, caption)

    pending = (r for r in records if r.id not in done)
    if max_workers <= 1:
        for record in pending:
            yield one(record)
        return
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        window: list = []
        for record in pending:
            window.append(pool.submit(one, record))
            # Keep the submission window bounded so huge corpora stream.
            if len(window) >= max_workers * 4:
                yield window.pop(0).result()
        for future in window:
            yield future.result()


@dataclass
class RecaptionStats:
    requested: int = 0
    succeeded: int = 0
    failed: int = 0
    rejected: int = 0
    skipped_done: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def existing_output_ids(out_dir: str | Path) -> set[str]:
    """Ids already present in an output directory's part files."""
    out_dir = Path(out_dir)
    ids: set[str] = set()
    if not out_dir.is_dir():
        return ids
    parts = sorted(out_dir.glob("part-*.jsonl"))
    if not parts:
        return ids
    manifest = DatasetManifest(
        shards=[Shard(str(p), 0, "") for p in parts]
    )
    for record in read_records(manifest):
        ids.add(record.id)
    return ids


def recaption_to_shards(
    manifest: DatasetManifest,
    fmt: CaptionFormat,
    client,
    out_dir: str | Path,
    *,
    templates: dict[CaptionFormat, str] | None = None,
    post_process: bool = True,
    specs: dict[CaptionFormat, FormatSpec] | None = None,
    max_records_per_shard: int | None = None,
) -> tuple[DatasetManifest, RecaptionStats]:
    """Recaption a corpus into output shards, resuming over prior partial runs.

    Output records are the input records with the generated caption added
    under ``fmt``. Captions failing post-processing are dropped and counted.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    done = existing_output_ids(out_dir)
    stats = RecaptionStats(skipped_done=len(done))
    by_id: dict[str, CaptionRecord] = {}

    def generate() -> Iterator[CaptionRecord]:
        source = read_records(manifest)

        def tracked() -> Iterator[CaptionRecord]:
            # Filter done ids before tracking so by_id only ever holds
            # in-flight records (bounded by the client's submission window).
            for record in source:
                if record.id in done:
                    continue
                by_id[record.id] = record
                yield record

        for result in recaption_batch(tracked(), fmt, client, templates, done_ids=done):
            stats.requested += 1
            record = by_id.pop(result.record_id)
            if not result.ok:
                stats.failed += 1
                log.warning("recaption failed for id=%s: %s", result.record_id, result.error)
                continue
            caption = result.caption
            if post_process:
                outcome = quality_post_process(caption, fmt, specs)
                if not outcome.accepted:
                    stats.rejected += 1
                    continue
                caption = outcome.caption
            elif not caption or not caption.strip():
                stats.rejected += 1
                continue
            stats.succeeded += 1
            captions = dict(record.captions)
            captions[fmt.value] = caption
            yield record.replace(captions=captions)

    start_index = len(sorted(out_dir.glob("part-*.jsonl")))
    shards = write_shard(
        generate(), out_dir / f"part-{start_index:05d}.jsonl", max_records_per_shard
    )
    all_parts = sorted(out_dir.glob("part-*.jsonl"))
    existing: list[Shard] = []
    new_by_path = {Path(s.path).resolve(): s for s in shards}
    for part in all_parts:
        resolved = part.resolve()
        if resolved in new_by_path:
            existing.append(new_by_path[resolved])
        else:
            count = 0
            hasher = hashlib.sha256()
            with open(part, "rb") as f:
                for line in f:
                    hasher.update(line)
                    count += 1
            existing.append(Shard(str(resolved), count, hasher.hexdigest()))
    out_manifest = DatasetManifest(shards=existing)
    save_manifest(out_manifest, out_dir / "manifest.json")
    return out_manifest, stats


# --------------------------------------------------------------------------
# Quality post-processing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PostProcessResult:
    accepted: bool
    caption: str | None
    reason: str | None = None


def _strip_boilerplate(caption: str, prefixes: tuple[str, ...]) -> str:
    stripped_any = False
    changed = True
    while changed:
        changed = False
        lowered = caption.lower()
        for prefix in prefixes:
            if lowered.startswith(prefix):
                caption = caption[len(prefix):].lstrip(" ,:;-")
                changed = stripped_any = True
                break
    if stripped_any and caption and caption[0].islower():
        caption = caption[0].upper() + caption[1:]
    return caption


def quality_post_process(
    caption: str,
    fmt: CaptionFormat,
    specs: dict[CaptionFormat, FormatSpec] | None = None,
    *,
    scheme: str = DEFAULT_SCHEME,
    boilerplate_prefixes: tuple[str, ...] = BOILERPLATE_PREFIXES,
    max_repeated_4gram: int = 2,
    model_check: Callable[[str], tuple[bool, str]] | None = None,
) -> PostProcessResult:
    """Heuristic quality gate for generated captions.

    Chain: strip boilerplate openers, collapse whitespace, enforce the
    format's constraints, reject degenerate repetition (any 4-gram occurring
    more than ``max_repeated_4gram`` times), then an optional model-based
    hook. Rejections are data, not errors.
    """
    if caption is None or not caption.strip():
        return PostProcessResult(False, None, "empty")
    caption = _strip_boilerplate(caption.strip(), boilerplate_prefixes)
    caption = " ".join(caption.split())
    if not caption:
        return PostProcessResult(False, None, "empty")
    try:
        report = validate(caption, fmt, specs, scheme=scheme)
    except EmptyCaption:
        return PostProcessResult(False, None, "empty")
    if not report.passed:
        return PostProcessResult(False, None, report.violations[0].constraint)
    tokens = tokenize(caption, scheme).tokens
    if len(tokens) >= 4:
        grams: dict[tuple[str, ...], int] = {}
        for i in range(len(tokens) - 3):
            gram = tokens[i : i + 4]
            grams[gram] = grams.get(gram, 0) + 1
            if grams[gram] > max_repeated_4gram:
                return PostProcessResult(False, None, "repetition")
    if model_check is not None:
        ok, reason = model_check(caption)
        if not ok:
            return PostProcessResult(False, None, reason or "model_check")
    return PostProcessResult(True, caption)


# --------------------------------------------------------------------------
# Deterministic in-process mocks
# --------------------------------------------------------------------------


class MockCaptionProvider:
    """Echo captioner: ``caption for <id> [<format>]``."""

    def __init__(self, endpoint: ProviderEndpoint | None = None):
        self.endpoint = endpoint or ProviderEndpoint(base_url="mock://captioner")
        self.calls: list[str] = []

    def caption(self, record_id: str, image_ref: str, prompt: str, fmt: CaptionFormat | None = None) -> str:
        self.calls.append(record_id)
        tag = fmt.value if fmt is not None else "caption"
        return f"caption for {record_id} [{tag}]"


class MockAssertionProvider:
    """Offline assertion provider: canned lists by caption, else the rule-based split."""

    def __init__(self, canned: dict[str, list[str]] | None = None):
        self.canned = canned or {}

    def assertions(self, caption: str) -> list[str]:
        if caption in self.canned:
            return list(self.canned[caption])
        return rule_based_assertions(caption)


def _statement_from_question(question: str) -> str:
    statement = question
    if "?" in statement:
        statement = statement.split("?", 1)[1]
    cut = statement.rfind("Answer")
    if cut != -1:
        statement = statement[:cut]
    return statement.strip()


class GroundedMockVqa:
    """Deterministic VQA grounded in per-image ground text.

    Answers yes iff every content word of the posed statement appears in the
    image's ground text (built from ``gt_objects`` via
    :meth:`from_records`). Unknown images answer no.
    """

    def __init__(self, ground_texts: dict[str, str]):
        self._ground: dict[str, frozenset[str]] = {}
        for image_ref, text in ground_texts.items():
            tokens = {singularize(t) for t in tokenize(text) if any(c.isalnum() for c in t)}
            self._ground[image_ref] = frozenset(tokens)
        self.calls = 0

    @classmethod
    def from_records(cls, records: Iterable[CaptionRecord]) -> "GroundedMockVqa":
        grounds = {}
        for record in records:
            if record.gt_objects is not None:
                grounds[record.image_ref] = " ".join(sorted(record.gt_objects))
        return cls(grounds)

    def ask(self, image_ref: str, question: str) -> str:
        self.calls += 1
        ground = self._ground.get(image_ref)
        if ground is None:
            return "no"
        statement = _statement_from_question(question)
        content = [
            singularize(t)
            for t in tokenize(statement)
            if any(c.isalnum() for c in t) and t not in STOPWORDS
        ]
        return "yes" if all(word in ground for word in content) else "no"
