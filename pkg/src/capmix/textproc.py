"""Deterministic text utilities: tokenization schemes, sentence splitting, token budgets.

Every metric and validator in the package counts tokens through this module so
that lengths are comparable across the whole pipeline. The default scheme is a
rule-based stand-in for subword tokenizers: all reported lengths and budget
checks are relative to the active scheme, and callers can register their own
scheme (e.g. a real subword tokenizer) via :func:`register_scheme`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from .errors import UnknownScheme

DEFAULT_SCHEME = "word"

# Function words used for content-word overlap checks (alt-fusion validation,
# grounded mock VQA). Deliberately small and frozen for reproducibility.
STOPWORDS = frozenset(
    """
    a an the this that these those and or but nor so yet of in on at by for
    with from to into onto over under near around between through across
    is are was were be been being am has have had do does did will would can
    could may might must shall should
    it its he him his she her hers they them their we us our you your yours
    i me my mine there here where when while not no nor as if than then very
    just also too some any each both more most other such own same s t
    """.split()
)

_WORD_OR_PUNCT = re.compile(r"\w+|[^\w\s]")
_NON_SPACE = re.compile(r"\S+")


@dataclass(frozen=True)
class TokenSequence:
    """Ordered tokens plus the scheme that produced them."""

    tokens: tuple[str, ...]
    scheme: str

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


@dataclass(frozen=True)
class Scheme:
    """A registered tokenization scheme.

    ``spans`` returns (start, end) offsets into the original text for each
    token; it is required for whole-token truncation but optional for plain
    counting schemes.
    """

    name: str
    tokenize: Callable[[str], list[str]]
    spans: Callable[[str], list[tuple[int, int]]] | None = None
    lowercases: bool = False


def _word_tokens(text: str) -> list[str]:
    # Maximal runs of word characters; every other non-space character is a
    # standalone token. Lowercased per token so offsets line up with the
    # original text even when lowercasing changes string length.
    return [m.group(0).lower() for m in _WORD_OR_PUNCT.finditer(text)]


def _word_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _WORD_OR_PUNCT.finditer(text)]


def _whitespace_tokens(text: str) -> list[str]:
    return text.split()


def _whitespace_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _NON_SPACE.finditer(text)]


_SCHEMES: dict[str, Scheme] = {}


def register_scheme(
    name: str,
    tokenize_fn: Callable[[str], list[str]],
    spans_fn: Callable[[str], list[tuple[int, int]]] | None = None,
    lowercases: bool = False,
) -> None:
    """Register a tokenization scheme under ``name`` (replacing any previous one)."""
    _SCHEMES[name] = Scheme(name, tokenize_fn, spans_fn, lowercases)


def available_schemes() -> tuple[str, ...]:
    return tuple(sorted(_SCHEMES))


def get_scheme(name: str) -> Scheme:
    try:
        return _SCHEMES[name]
    except KeyError:
        raise UnknownScheme(name, available_schemes()) from None


register_scheme("word", _word_tokens, _word_spans, lowercases=True)
register_scheme("whitespace", _whitespace_tokens, _whitespace_spans, lowercases=False)


def tokenize(text: str, scheme: str = DEFAULT_SCHEME) -> TokenSequence:
    """Split ``text`` into tokens under the named scheme.

    Deterministic, and idempotent on already-normalized text (re-tokenizing
    ``" ".join(tokens)`` yields the same tokens).
    """
    sch = get_scheme(scheme)
    return TokenSequence(tuple(sch.tokenize(text)), scheme)


def count_tokens(text: str, scheme: str = DEFAULT_SCHEME) -> int:
    return len(get_scheme(scheme).tokenize(text))


def fits_budget(text: str, budget: int, scheme: str = DEFAULT_SCHEME) -> bool:
    """True iff ``text`` has at most ``budget`` tokens under the scheme."""
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    return count_tokens(text, scheme) <= budget


def token_spans(text: str, scheme: str = DEFAULT_SCHEME) -> list[tuple[int, int]]:
    """(start, end) offsets of each token in the original text."""
    sch = get_scheme(scheme)
    if sch.spans is None:
        raise ValueError(f"scheme {scheme!r} does not expose token offsets")
    return sch.spans(text)


# --------------------------------------------------------------------------
# Sentence splitting
# --------------------------------------------------------------------------

_TERMINALS = ".!?"
_CLOSERS = "\"'”’)]"

# Trailing-period abbreviations that never end a sentence. Single uppercase
# initials ("J.") are also exempt. The list is fixed so sentence counts are
# stable across runs.
ABBREVIATIONS = frozenset(
    {
        "e.g.", "i.e.", "etc.", "vs.", "cf.", "al.", "fig.", "figs.", "no.",
        "st.", "dr.", "mr.", "mrs.", "ms.", "prof.", "jr.", "sr.", "inc.",
        "ltd.", "co.", "dept.", "approx.", "est.", "min.", "max.",
    }
)

_TRAILING_CHUNK = re.compile(r"(\S+)$")
_INITIAL = re.compile(r"[A-Z]\.\Z")


@dataclass(frozen=True)
class SentenceSplit:
    """Sentence spans of a text.

    ``sentences[i]`` equals ``text[spans[i][0]:spans[i][1]]``; the gaps
    between consecutive spans are whitespace only, so the spans partition the
    input up to inter-sentence whitespace.
    """

    sentences: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


def _skip_ws(text: str, i: int) -> int:
    n = len(text)
    while i < n and text[i].isspace():
        i += 1
    return i


def _is_abbreviation(text: str, punct_start: int, punct_end: int) -> bool:
    # Only a lone "." can belong to an abbreviation.
    if punct_end - punct_start != 1 or text[punct_start] != ".":
        return False
    m = _TRAILING_CHUNK.search(text, 0, punct_start)
    if not m:
        return False
    chunk = m.group(1).lstrip("\"'“‘([") + "."
    if chunk.lower() in ABBREVIATIONS:
        return True
    return bool(_INITIAL.fullmatch(chunk))


def split_sentences(text: str) -> SentenceSplit:
    """Split on terminal punctuation (. ! ?) followed by whitespace or end of text.

    Consecutive terminals ("?!") and closing quotes/brackets attach to the
    sentence they end. Abbreviations from :data:`ABBREVIATIONS` and single
    uppercase initials do not end sentences. Trailing text without terminal
    punctuation forms a final sentence.
    """
    sentences: list[str] = []
    spans: list[tuple[int, int]] = []
    n = len(text)
    start = _skip_ws(text, 0)
    i = start
    while i < n:
        if text[i] in _TERMINALS:
            j = i + 1
            while j < n and text[j] in _TERMINALS:
                j += 1
            k = j
            while k < n and text[k] in _CLOSERS:
                k += 1
            boundary = (k >= n or text[k].isspace()) and not _is_abbreviation(text, i, j)
            if boundary:
                sentences.append(text[start:k])
                spans.append((start, k))
                start = _skip_ws(text, k)
                i = start
                continue
            i = j
        else:
            i += 1
    if start < n:
        tail = text[start:].rstrip()
        if tail:
            sentences.append(tail)
            spans.append((start, start + len(tail)))
    return SentenceSplit(tuple(sentences), tuple(spans))
