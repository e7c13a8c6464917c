from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capmix.errors import UnknownScheme
from capmix.textproc import (
    available_schemes,
    count_tokens,
    fits_budget,
    register_scheme,
    split_sentences,
    token_spans,
    tokenize,
)


def test_tokenize_empty():
    assert tokenize("").tokens == ()
    assert count_tokens("") == 0


def test_tokenize_basic_sentence():
    assert tokenize("A dog runs.").tokens == ("a", "dog", "runs", ".")


def test_tokenize_nonascii_and_dashes():
    assert tokenize("Café—open!").tokens == ("café", "—", "open", "!")


def test_tokenize_unknown_scheme():
    with pytest.raises(UnknownScheme):
        tokenize("hello", scheme="nope")


def test_count_matches_tokenize():
    text = "Quick brown foxes, 42 of them!"
    assert count_tokens(text) == len(tokenize(text).tokens)


def test_count_whitespace_words():
    assert count_tokens("a b c") == 3


def test_whitespace_scheme():
    assert tokenize("A b-c d.", scheme="whitespace").tokens == ("A", "b-c", "d.")


def test_register_custom_scheme():
    register_scheme("chars", lambda t: list(t.replace(" ", "")))
    assert count_tokens("ab c", scheme="chars") == 3
    assert "chars" in available_schemes()


def test_token_spans_align_with_tokens():
    text = "Hello, Big WORLD!"
    spans = token_spans(text)
    rebuilt = [text[s:e].lower() for s, e in spans]
    assert rebuilt == list(tokenize(text).tokens)


@settings(max_examples=200)
@given(st.text(max_size=200))
def test_tokenize_deterministic_and_idempotent(text):
    first = tokenize(text).tokens
    assert tokenize(text).tokens == first
    renormalized = " ".join(first)
    assert tokenize(renormalized).tokens == first


@settings(max_examples=100)
@given(st.text(max_size=100), st.text(max_size=100))
def test_count_monotonic_under_concat(a, b):
    joined = count_tokens(a + " " + b)
    assert joined >= max(count_tokens(a), count_tokens(b))
    assert joined == count_tokens(a) + count_tokens(b)


def test_fits_budget_boundaries():
    text_78 = " ".join(f"w{i}" for i in range(78))
    assert fits_budget(text_78, 78)
    assert not fits_budget(text_78, 77)
    assert fits_budget("", 0)


def test_fits_budget_rejects_negative():
    with pytest.raises(ValueError):
        fits_budget("x", -1)


def test_split_sentences_simple():
    assert split_sentences("A dog. A cat.").sentences == ("A dog.", "A cat.")


def test_split_sentences_empty():
    assert split_sentences("").sentences == ()
    assert split_sentences("   ").sentences == ()


def test_split_sentences_terminal_mix():
    assert len(split_sentences("Wow! Is it real? Yes.")) == 3


def test_split_sentences_abbreviations():
    split = split_sentences("See e.g. the photo by Dr. Smith. It is old.")
    assert split.sentences == ("See e.g. the photo by Dr. Smith.", "It is old.")


def test_split_sentences_initials():
    assert len(split_sentences("J. Smith arrived early. Nobody else came.")) == 2


def test_split_sentences_trailing_text():
    assert split_sentences("No terminal punctuation here").sentences == (
        "No terminal punctuation here",
    )


def test_split_sentences_attached_quotes():
    split = split_sentences('He said "stop." Then he left.')
    assert split.sentences == ('He said "stop."', "Then he left.")


@settings(max_examples=200)
@given(st.text(max_size=300))
def test_sentence_spans_partition_input(text):
    split = split_sentences(text)
    previous_end = 0
    for (start, end), sentence in zip(split.spans, split.sentences):
        assert text[start:end] == sentence
        assert sentence
        gap = text[previous_end:start]
        assert gap == "" or gap.isspace()
        previous_end = end
    tail = text[previous_end:]
    assert tail == "" or tail.isspace()
