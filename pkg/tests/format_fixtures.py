"""Hand-labeled caption fixtures covering every format constraint.

Token counts under the default scheme are trivially auditable: ``words(n)``
contributes exactly n tokens and a trailing period contributes one more.
Each fixture freezes the expected validation outcome (violated constraint
names) and the expected classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def words(n: int, stem: str = "word") -> str:
    return " ".join(f"{stem}{i}" for i in range(n))


@dataclass(frozen=True)
class FormatFixture:
    name: str
    caption: str
    format: str
    expect_pass: bool
    expect_violations: frozenset[str] = field(default_factory=frozenset)
    expect_class: str | None = None
    alt_text: str | None = None


F = FormatFixture

FIXTURES: list[FormatFixture] = [
    # --- ssc: one sentence, 5..25 tokens -------------------------------------
    F("ssc_pass_simple", "A dog runs in the park.", "ssc", True, expect_class="ssc"),
    F("ssc_pass_10tok", "A small brown dog chases a bright red ball.", "ssc", True, expect_class="ssc"),
    F("ssc_fail_two_sentences", "A dog. It is brown.", "ssc", False,
      frozenset({"max_sentences"}), expect_class=None),
    F("ssc_fail_exclaim_split", "Wow! A cat sleeps here.", "ssc", False,
      frozenset({"max_sentences"}), expect_class=None),
    F("ssc_fail_short", "A dog.", "ssc", False, frozenset({"min_tokens"}), expect_class=None),
    F("ssc_fail_short2", "Red car.", "ssc", False, frozenset({"min_tokens"}), expect_class=None),
    F("ssc_fail_long_31", words(30) + ".", "ssc", False, frozenset({"max_tokens"}), expect_class="dsc"),
    F("ssc_fail_long_26", words(25) + ".", "ssc", False, frozenset({"max_tokens"}), expect_class=None),
    # --- dsc: 30..78 tokens (78 inclusive) ------------------------------------
    F("dsc_pass_min_30", words(29) + ".", "dsc", True, expect_class="dsc"),
    F("dsc_pass_max_78", words(77) + ".", "dsc", True, expect_class="dsc"),
    F("dsc_pass_50tok_3sent", words(15) + ". " + words(16) + ". " + words(16) + ".", "dsc", True,
      expect_class="dsc"),
    F("dsc_fail_79", words(78) + ".", "dsc", False, frozenset({"max_tokens"}), expect_class="dscplus"),
    F("dsc_fail_90", words(89) + ".", "dsc", False, frozenset({"max_tokens"}), expect_class="dscplus"),
    F("dsc_fail_short_8", "A tiny red bird sings loudly outside.", "dsc", False,
      frozenset({"min_tokens"}), expect_class="ssc"),
    F("dsc_fail_29_gap", words(28) + ".", "dsc", False, frozenset({"min_tokens"}), expect_class=None),
    # --- dscplus: 79 tokens or more -------------------------------------------
    F("dscplus_pass_min_79", words(78) + ".", "dscplus", True, expect_class="dscplus"),
    F("dscplus_pass_100", words(99) + ".", "dscplus", True, expect_class="dscplus"),
    F("dscplus_pass_multi_129", words(40) + ". " + words(40) + ". " + words(46) + ".", "dscplus",
      True, expect_class="dscplus"),
    F("dscplus_fail_78", words(77) + ".", "dscplus", False, frozenset({"min_tokens"}), expect_class="dsc"),
    F("dscplus_fail_40", words(39) + ".", "dscplus", False, frozenset({"min_tokens"}), expect_class="dsc"),
    F("dscplus_fail_tiny", "A dog sits on a mat.", "dscplus", False,
      frozenset({"min_tokens"}), expect_class="ssc"),
    # --- afc: dsc bounds plus alt overlap when alt text is present ------------
    F("afc_pass_landmark",
      "The Eiffel Tower stands tall over the river in Paris " + words(24) + ".",
      "afc", True, expect_class="dsc", alt_text="Eiffel Tower tickets and tours"),
    F("afc_pass_product",
      "Fresh organic honey jar on a wooden shelf " + words(24) + ".",
      "afc", True, expect_class="dsc", alt_text="organic honey 500g jar buy online"),
    F("afc_pass_no_alt", words(34) + ".", "afc", True, expect_class="dsc", alt_text=None),
    F("afc_fail_no_overlap", words(34) + ".", "afc", False, frozenset({"alt_fusion"}),
      expect_class="dsc", alt_text="quantum blockchain webinar registration"),
    F("afc_fail_vacuous_alt",
      "A busy street with cars and people walking around " + words(22) + ".",
      "afc", False, frozenset({"alt_fusion"}), expect_class="dsc", alt_text="of the and or"),
    F("afc_fail_short", "Blue ceramic mug with coffee.", "afc", False,
      frozenset({"min_tokens"}), expect_class="ssc", alt_text="ceramic mug sale"),
    F("afc_fail_long", words(84) + ".", "afc", False, frozenset({"max_tokens"}),
      expect_class="dscplus", alt_text="word0 store"),
    # --- alt text: unconstrained ----------------------------------------------
    F("alt_pass_junk", "cheap hotels NYC !!! best deals 2024", "alt", True, expect_class=None),
    F("alt_pass_long", words(150) + ".", "alt", True, expect_class="dscplus"),
    # --- extra coverage ---------------------------------------------------------
    F("ssc_pass_11tok", "A brown cat sits quietly on the warm windowsill today.", "ssc", True,
      expect_class="ssc"),
    F("ssc_fail_terse_pair", "A dog runs. It barks.", "ssc", False,
      frozenset({"max_sentences"}), expect_class=None),
    F("ssc_pass_nonascii", "Café 'Über' am Fluß—ein kleines Haus im Grünen.",
      "ssc", True, expect_class="ssc"),
    F("ssc_fail_punct_only", "Dog!!!", "ssc", False, frozenset({"min_tokens"}), expect_class=None),
    F("ssc_pass_quoted", 'A sign reads "Open Daily" near the door.', "ssc", True, expect_class="ssc"),
    F("dsc_pass_emdash", "The market—open since dawn—sells fruit " + words(21) + ".",
      "dsc", True, expect_class="dsc"),
    F("afc_pass_min_30", "Leather boots on display in a shop window " + words(21) + ".",
      "afc", True, expect_class="dsc", alt_text="leather boots size 42"),
    F("afc_fail_double", "Shiny new laptop.", "afc", False,
      frozenset({"min_tokens", "alt_fusion"}), expect_class=None, alt_text="quantum gardening"),
    F("dsc_fail_5tok", "A dog sits here.", "dsc", False, frozenset({"min_tokens"}),
      expect_class="ssc"),
    F("ssc_pass_min_5", "Dog runs very fast.", "ssc", True, expect_class="ssc"),
]

assert len(FIXTURES) == 40, f"expected 40 fixtures, have {len(FIXTURES)}"
