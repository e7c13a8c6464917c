from __future__ import annotations

import json
from pathlib import Path

import pytest

from capmix.cli import main
from capmix.corpus import (
    CaptionRecord,
    load_manifest,
    manifest_for_shards,
    read_records,
    save_manifest,
    write_shard,
)
from capmix.mixer import training_text
from capmix.richness import extract_entities
from conftest import make_record
from oracles import oracle_chair, oracle_entity_union


def _write_manifest(tmp_path, records, name="in"):
    shards = write_shard(records, tmp_path / name / "corpus.jsonl")
    manifest = manifest_for_shards(shards)
    path = tmp_path / name / "manifest.json"
    save_manifest(manifest, path)
    return path


@pytest.fixture
def corpus_manifest(tmp_path):
    records = [make_record(i, formats=("ssc", "dsc")) for i in range(30)]
    return _write_manifest(tmp_path, records), records


def test_stats_outputs(tmp_path, corpus_manifest):
    manifest_path, records = corpus_manifest
    out = tmp_path / "stats"
    code = main(
        ["stats", "--manifest", str(manifest_path), "--out", str(out), "--seed", "4",
         "--formats", "ssc,dsc,alt", "--sample-size", "100"]
    )
    assert code == 0
    stats = json.loads((out / "stats.json").read_text())
    assert stats["records_total"] == 30
    assert (out / "hist_ssc.csv").exists()
    assert (out / "hist_dsc.csv").exists()
    assert not (out / "hist_afc.csv").exists()  # filtered out
    assert stats["histograms"]["ssc"]["total"] == 30
    run_manifest = json.loads((out / "run_manifest.json").read_text())
    assert run_manifest["seed"] == 4
    assert run_manifest["command"] == "stats"
    # Entity counts agree with the brute-force union oracle (full sample).
    for source in ("ssc", "alt"):
        assert stats["entities"]["per_source"][source] == oracle_entity_union(
            records, source, extract_entities
        )


def test_validate_flags_over_budget_captions(tmp_path):
    long_dsc = " ".join(f"w{i}" for i in range(85)) + "."
    good_dsc = " ".join(f"w{i}" for i in range(40)) + "."
    records = [
        CaptionRecord(id="bad", image_ref="i1.jpg", captions={"dsc": long_dsc}),
        CaptionRecord(id="good", image_ref="i2.jpg", captions={"dsc": good_dsc}),
    ]
    manifest_path = _write_manifest(tmp_path, records)
    out = tmp_path / "val"
    code = main(["validate", "--manifest", str(manifest_path), "--format", "dsc", "--out", str(out)])
    assert code == 0
    report = json.loads((out / "validation.json").read_text())
    assert report["checked"] == 2
    assert report["failed"] == 1
    assert report["failures"][0]["id"] == "bad"
    assert report["failures"][0]["violations"][0]["constraint"] == "max_tokens"
    assert report["failures"][0]["violations"][0]["measured"] == 86


def test_mix_ratio_one_emits_alt_only(tmp_path, corpus_manifest):
    manifest_path, records = corpus_manifest
    out = tmp_path / "mixed"
    code = main(
        ["mix", "--manifest", str(manifest_path), "--out", str(out),
         "--ratio", "1.0", "--sources", "alt,ssc", "--seed", "7"]
    )
    assert code == 0
    emitted = list(read_records(load_manifest(out / "manifest.json")))
    by_id = {r.id: r for r in records}
    assert len(emitted) == 30
    for rec in emitted:
        assert training_text(rec) == by_id[rec.id].alt_text


def test_mix_rerun_same_seed_byte_identical(tmp_path, corpus_manifest):
    manifest_path, _ = corpus_manifest
    args = ["mix", "--manifest", str(manifest_path), "--ratio", "0.5",
            "--sources", "alt,ssc", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "m1")]) == 0
    assert main(args + ["--out", str(tmp_path / "m2")]) == 0
    m1 = load_manifest(tmp_path / "m1" / "manifest.json")
    m2 = load_manifest(tmp_path / "m2" / "manifest.json")
    for s1, s2 in zip(m1.shards, m2.shards):
        assert Path(s1.path).read_bytes() == Path(s2.path).read_bytes()


def test_sweep_six_directories(tmp_path, corpus_manifest):
    manifest_path, _ = corpus_manifest
    out = tmp_path / "sw"
    code = main(
        ["sweep", "--manifest", str(manifest_path), "--out", str(out),
         "--ratios", "0,20,40,60,80,100", "--sources", "alt,ssc", "--seed", "3"]
    )
    assert code == 0
    dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert dirs == ["ratio_000", "ratio_020", "ratio_040", "ratio_060", "ratio_080", "ratio_100"]
    summary = json.loads((out / "sweep_report.json").read_text())
    assert len(summary) == 6


def test_chair_cli_matches_oracle(tmp_path):
    records = [
        CaptionRecord(id="c1", image_ref="i1.jpg", captions={"dsc": "A dog chases a cat."},
                      gt_objects=frozenset({"dog"})),
        CaptionRecord(id="c2", image_ref="i2.jpg", captions={"dsc": "A dog sleeps."},
                      gt_objects=frozenset({"dog"})),
    ]
    manifest_path = _write_manifest(tmp_path, records)
    vocab_path = tmp_path / "vocab.txt"
    vocab_path.write_text("dog\ncat\n", encoding="utf-8")
    out = tmp_path / "chair"
    code = main(
        ["chair", "--manifest", str(manifest_path), "--format", "dsc",
         "--vocab", str(vocab_path), "--out", str(out)]
    )
    assert code == 0
    report = json.loads((out / "chair.json").read_text())
    want = oracle_chair(records, "dsc", {"dog", "cat"}, {})
    assert report["chair_i"] == want.chair_i
    assert report["chair_s"] == want.chair_s


def test_capscore_mock_deterministic(tmp_path):
    fixture = Path(__file__).parent / "data" / "capscore_fixture.jsonl"
    records = [line for line in fixture.read_text().splitlines() if line.strip()]
    from capmix.corpus import parse_record

    manifest_path = _write_manifest(tmp_path, [parse_record(l) for l in records])
    outputs = []
    for name in ("cs1", "cs2"):
        out = tmp_path / name
        code = main(
            ["capscore", "--manifest", str(manifest_path), "--format", "dsc",
             "--mock", "--out", str(out), "--details"]
        )
        assert code == 0
        outputs.append((out / "capscore.json").read_bytes())
    assert outputs[0] == outputs[1]
    assert json.loads(outputs[0])["capscore"] == 75.0


def test_recaption_mock(tmp_path, corpus_manifest):
    manifest_path, _ = corpus_manifest
    out = tmp_path / "recap"
    code = main(
        ["recaption", "--manifest", str(manifest_path), "--format", "ssc",
         "--mock", "--out", str(out)]
    )
    assert code == 0
    stats = json.loads((out / "recaption_stats.json").read_text())
    assert stats["requested"] == 30
    assert stats["succeeded"] == 30
    emitted = list(read_records(load_manifest(out / "manifest.json")))
    assert len(emitted) == 30


def test_config_file_with_flag_override(tmp_path, corpus_manifest):
    manifest_path, _ = corpus_manifest
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "manifest": str(manifest_path),
        "ratio": 0.0,
        "sources": "alt,ssc",
        "seed": 5,
    }))
    out = tmp_path / "cfgmix"
    code = main(["mix", "--config", str(config), "--out", str(out), "--ratio", "1.0"])
    assert code == 0
    report = json.loads((out / "mix_report.json").read_text())
    assert report["recipe"]["alt_ratio"] == 1.0  # flag beats config
    assert report["recipe"]["seed"] == 5  # config fills the gap
    run_manifest = json.loads((out / "run_manifest.json").read_text())
    assert run_manifest["config"]["ratio"] == 1.0


def test_exit_code_2_on_config_error(tmp_path, corpus_manifest, capsys):
    manifest_path, _ = corpus_manifest
    code = main(["mix", "--manifest", str(manifest_path), "--out", str(tmp_path / "x"),
                 "--ratio", "1.7", "--sources", "alt,ssc"])
    assert code == 2
    code = main(["capscore", "--manifest", str(manifest_path), "--format", "dsc",
                 "--out", str(tmp_path / "y")])
    assert code == 2  # neither --mock nor --vqa-endpoint


def test_exit_code_3_on_missing_input(tmp_path):
    code = main(["stats", "--manifest", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")])
    assert code == 3


def test_exit_code_4_on_provider_failure(tmp_path, corpus_manifest):
    manifest_path, _ = corpus_manifest
    # Per-record recaption failures are data, not a command failure.
    code = main(
        ["recaption", "--manifest", str(manifest_path), "--format", "ssc",
         "--endpoint", "http://127.0.0.1:9", "--out", str(tmp_path / "r"),
         "--max-retries", "0", "--timeout-ms", "200"]
    )
    assert code == 0
    stats = json.loads((tmp_path / "r" / "recaption_stats.json").read_text())
    assert stats["failed"] == 30
    # A hard provider failure (capscore aborts by default) maps to exit 4.
    code = main(
        ["capscore", "--manifest", str(manifest_path), "--format", "dsc",
         "--vqa-endpoint", "http://127.0.0.1:9", "--out", str(tmp_path / "c"),
         "--max-retries", "0", "--timeout-ms", "200"]
    )
    assert code == 4


def test_inputs_never_mutated(tmp_path, corpus_manifest):
    manifest_path, _ = corpus_manifest
    manifest = load_manifest(manifest_path)
    before = [Path(s.path).read_bytes() for s in manifest.shards]
    main(["mix", "--manifest", str(manifest_path), "--out", str(tmp_path / "mm"),
          "--ratio", "0.5", "--sources", "alt,ssc", "--seed", "1"])
    main(["stats", "--manifest", str(manifest_path), "--out", str(tmp_path / "ss")])
    after = [Path(s.path).read_bytes() for s in manifest.shards]
    assert before == after


def test_workers_flag_identical_output(tmp_path):
    records = [make_record(i, formats=("ssc", "dsc")) for i in range(60)]
    shards = write_shard(records, tmp_path / "in" / "c.jsonl", max_records=20)
    manifest_path = tmp_path / "in" / "manifest.json"
    save_manifest(manifest_for_shards(shards), manifest_path)
    base = ["mix", "--manifest", str(manifest_path), "--ratio", "0.5",
            "--sources", "alt,ssc", "--seed", "2"]
    assert main(base + ["--out", str(tmp_path / "w1"), "--workers", "1"]) == 0
    assert main(base + ["--out", str(tmp_path / "w3"), "--workers", "3"]) == 0
    m1 = load_manifest(tmp_path / "w1" / "manifest.json")
    m3 = load_manifest(tmp_path / "w3" / "manifest.json")
    assert [Path(s.path).read_bytes() for s in m1.shards] == [
        Path(s.path).read_bytes() for s in m3.shards
    ]
