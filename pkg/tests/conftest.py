from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from capmix.corpus import CaptionRecord, manifest_for_shards, write_shard


def make_record(i: int, *, with_gt: bool = False, formats: tuple[str, ...] = ("ssc",)) -> CaptionRecord:
    captions = {}
    if "ssc" in formats:
        captions["ssc"] = f"A red item number {i} sits on a table."
    if "dsc" in formats:
        captions["dsc"] = (
            " ".join(f"word{j}" for j in range(40)) + f" item {i}."
        )
    if "dscplus" in formats:
        captions["dscplus"] = " ".join(f"token{j}" for j in range(90)) + f" item {i}."
    if "afc" in formats:
        captions["afc"] = " ".join(f"fused{j}" for j in range(35)) + f" alt item {i}."
    return CaptionRecord(
        id=f"r{i:06d}",
        image_ref=f"img/{i:06d}.jpg",
        alt_text=f"alt text item {i}",
        captions=captions,
        gt_objects=frozenset({"dog", "cat"}) if with_gt else None,
    )


def build_corpus(tmp_path: Path, n: int, *, shard_size: int | None = None, **kwargs):
    """Write n synthetic records as shards; returns (manifest, records)."""
    records = [make_record(i, **kwargs) for i in range(n)]
    shards = write_shard(records, tmp_path / "corpus.jsonl", shard_size)
    return manifest_for_shards(shards), records


@pytest.fixture
def small_corpus(tmp_path):
    return build_corpus(tmp_path / "corpus", 20, formats=("ssc", "dsc"))


def seeded_rng(seed: int = 1234) -> random.Random:
    return random.Random(seed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    reports = []
    for outcome in ("passed", "failed", "error"):
        reports.extend(terminalreporter.stats.get(outcome, []))
    acceptance = sorted(
        (r for r in reports if "test_acceptance" in r.nodeid and r.when == "call"),
        key=lambda r: r.nodeid,
    )
    if not acceptance:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for report in acceptance:
        name = report.nodeid.split("::")[-1]
        terminalreporter.write_line(f"{name}: {report.outcome.upper()}")
