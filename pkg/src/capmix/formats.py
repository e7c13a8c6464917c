"""Caption format contracts: the closed format set, per-format constraints, validation.

The four synthetic formats form a closed set alongside raw alt text:

* ``ssc`` — one concise sentence naming the primary subject.
* ``dsc`` — a bounded description (token ceiling 78, inclusive) of the
  central subject and key visual elements.
* ``dscplus`` — an unbounded dense description (79 tokens or more) covering
  subject, background, setting, and salient objects or actions.
* ``afc`` — a ``dsc``-length description that folds in usable alt-text
  information.

Numeric band edges beyond the hard ``dsc`` ceiling are configuration
defaults and can be overridden per run via a spec registry file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import EmptyCaption, MalformedSyntax
from .textproc import DEFAULT_SCHEME, STOPWORDS, count_tokens, split_sentences, tokenize


class CaptionFormat(str, Enum):
    ALT_TEXT = "alt"
    SSC = "ssc"
    DSC = "dsc"
    DSC_PLUS = "dscplus"
    AFC = "afc"

    @classmethod
    def from_key(cls, key: str) -> "CaptionFormat":
        for fmt in cls:
            if fmt.value == key:
                return fmt
        raise ValueError(f"not a caption format key: {key!r}")


SYNTHETIC_FORMATS: tuple[CaptionFormat, ...] = (
    CaptionFormat.SSC,
    CaptionFormat.DSC,
    CaptionFormat.DSC_PLUS,
    CaptionFormat.AFC,
)

# Keys allowed in a record's captions map. Alt text lives in its own record
# field, never in the captions map, so source-vs-synthetic stays structural.
CAPTION_KEYS = frozenset(f.value for f in SYNTHETIC_FORMATS)

# Classification candidates, most constrained first. AFC is excluded: its
# text-only constraints equal DSC's, so it cannot be told apart from DSC
# without the record's alt text.
_CLASSIFY_ORDER: tuple[CaptionFormat, ...] = (
    CaptionFormat.SSC,
    CaptionFormat.DSC,
    CaptionFormat.DSC_PLUS,
)


@dataclass(frozen=True)
class FormatSpec:
    """Machine-checkable constraints for one caption format."""

    format: CaptionFormat
    max_sentences: int | None = None
    min_tokens: int | None = None
    max_tokens: int | None = None
    requires_alt_fusion: bool = False

    def __post_init__(self):
        if (
            self.min_tokens is not None
            and self.max_tokens is not None
            and self.min_tokens > self.max_tokens
        ):
            raise ValueError(
                f"min_tokens {self.min_tokens} exceeds max_tokens {self.max_tokens}"
            )


def default_specs() -> dict[CaptionFormat, FormatSpec]:
    """The default spec registry, one entry per format."""
    return {
        CaptionFormat.ALT_TEXT: FormatSpec(CaptionFormat.ALT_TEXT),
        CaptionFormat.SSC: FormatSpec(
            CaptionFormat.SSC, max_sentences=1, min_tokens=5, max_tokens=25
        ),
        CaptionFormat.DSC: FormatSpec(CaptionFormat.DSC, min_tokens=30, max_tokens=78),
        CaptionFormat.DSC_PLUS: FormatSpec(CaptionFormat.DSC_PLUS, min_tokens=79),
        CaptionFormat.AFC: FormatSpec(
            CaptionFormat.AFC, min_tokens=30, max_tokens=78, requires_alt_fusion=True
        ),
    }


@dataclass(frozen=True)
class Violation:
    constraint: str
    measured: int
    limit: int | None


@dataclass(frozen=True)
class ValidationReport:
    format: CaptionFormat
    passed: bool
    violations: tuple[Violation, ...]
    token_count: int
    sentence_count: int


def content_words(text: str, scheme: str = DEFAULT_SCHEME) -> frozenset[str]:
    """Casefolded alphanumeric tokens that are not stopwords."""
    return frozenset(
        t.casefold()
        for t in tokenize(text, scheme)
        if any(c.isalnum() for c in t) and t.casefold() not in STOPWORDS
    )


def validate(
    caption: str,
    fmt: CaptionFormat,
    specs: dict[CaptionFormat, FormatSpec] | None = None,
    *,
    scheme: str = DEFAULT_SCHEME,
    alt_text: str | None = None,
) -> ValidationReport:
    """Check ``caption`` against the spec for ``fmt``.

    The alt-fusion constraint is a cheap necessary condition — at least one
    shared content word between caption and alt text — and is only evaluated
    when ``alt_text`` is supplied.
    """
    if not caption or not caption.strip():
        raise EmptyCaption("cannot validate an empty caption")
    spec = (specs or default_specs())[fmt]
    tokens = count_tokens(caption, scheme)
    sentences = len(split_sentences(caption))
    violations: list[Violation] = []
    if spec.max_sentences is not None and sentences > spec.max_sentences:
        violations.append(Violation("max_sentences", sentences, spec.max_sentences))
    if spec.min_tokens is not None and tokens < spec.min_tokens:
        violations.append(Violation("min_tokens", tokens, spec.min_tokens))
    if spec.max_tokens is not None and tokens > spec.max_tokens:
        violations.append(Violation("max_tokens", tokens, spec.max_tokens))
    if spec.requires_alt_fusion and alt_text is not None and alt_text.strip():
        overlap = content_words(caption, scheme) & content_words(alt_text, scheme)
        if not overlap:
            violations.append(Violation("alt_fusion", 0, 1))
    return ValidationReport(
        format=fmt,
        passed=not violations,
        violations=tuple(violations),
        token_count=tokens,
        sentence_count=sentences,
    )


def classify(
    caption: str,
    specs: dict[CaptionFormat, FormatSpec] | None = None,
    *,
    scheme: str = DEFAULT_SCHEME,
) -> CaptionFormat | None:
    """The most constrained synthetic format the caption satisfies, or None.

    Candidates are tried in order ssc > dsc > dscplus, so a caption matching
    several bands classifies as the tightest one. Returns None when no
    candidate matches (unclassifiable).
    """
    specs = specs or default_specs()
    for fmt in _CLASSIFY_ORDER:
        if validate(caption, fmt, specs, scheme=scheme).passed:
            return fmt
    return None


# --------------------------------------------------------------------------
# Spec registry serialization (so recipes can pin custom bands)
# --------------------------------------------------------------------------


def specs_to_dict(specs: dict[CaptionFormat, FormatSpec]) -> dict:
    out = {}
    for fmt, spec in specs.items():
        out[fmt.value] = {
            "max_sentences": spec.max_sentences,
            "min_tokens": spec.min_tokens,
            "max_tokens": spec.max_tokens,
            "requires_alt_fusion": spec.requires_alt_fusion,
        }
    return out


def specs_from_dict(data: dict) -> dict[CaptionFormat, FormatSpec]:
    specs = default_specs()
    for key, fields in data.items():
        try:
            fmt = CaptionFormat.from_key(key)
        except ValueError as e:
            raise MalformedSyntax(str(e)) from None
        if not isinstance(fields, dict):
            raise MalformedSyntax(f"spec for {key!r} must be an object")
        base = {
            "max_sentences": fields.get("max_sentences"),
            "min_tokens": fields.get("min_tokens"),
            "max_tokens": fields.get("max_tokens"),
            "requires_alt_fusion": bool(fields.get("requires_alt_fusion", False)),
        }
        specs[fmt] = FormatSpec(fmt, **base)
    return specs


def save_specs(specs: dict[CaptionFormat, FormatSpec], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(specs_to_dict(specs), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_specs(path: str | Path) -> dict[CaptionFormat, FormatSpec]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MalformedSyntax(f"bad spec registry file {path}: {e}") from None
    if not isinstance(data, dict):
        raise MalformedSyntax(f"spec registry {path} must be a JSON object")
    return specs_from_dict(data)
