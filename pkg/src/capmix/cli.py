"""Single command-line entry point for every pipeline stage.

Subcommands: ``stats | validate | mix | sweep | chair | capscore | recaption``.

Options resolve as *flags > config file > defaults*; the fully resolved
configuration, seed, versions, and timings land in a ``run_manifest.json``
next to each command's outputs so runs are reproducible. Exit codes:
0 success, 2 usage/config error, 3 I/O error, 4 provider failure.
Input shards are never mutated.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

from . import __version__
from .corpus import DatasetManifest, RecordError, load_manifest, read_records
from .errors import (
    CapmixError,
    ChecksumMismatch,
    IoFailure,
    MalformedSyntax,
    ProviderFailure,
    ShardMissing,
)
from .formats import CaptionFormat, default_specs, load_specs, validate
from .hallucination import ObjectVocabulary, capscore, chair, default_vocabulary
from .mixer import MixRecipe, mix_corpus, sweep
from .providers import (
    AssertionClient,
    CaptionClient,
    GroundedMockVqa,
    MockCaptionProvider,
    ProviderEndpoint,
    VqaClient,
    recaption_to_shards,
)
from .richness import ana, entity_diversity, token_length_histogram
from .textproc import DEFAULT_SCHEME, available_schemes

DEFAULT_ENTITY_SAMPLE = 17_500


class ConfigError(CapmixError):
    """Bad or inconsistent run configuration (exit code 2)."""


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must be a JSON object")
    return data


class RunConfig:
    """Flag/config-file resolution: explicit flags win, then config, then defaults."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = vars(args)
        self._config = config
        self.resolved: dict = {}

    def get(self, key: str, default=None):
        value = self._args.get(key)
        if value is None:
            value = self._config.get(key, default)
        self.resolved[key] = value
        return value

    def require(self, key: str):
        value = self.get(key)
        if value is None:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        return value


def _write_run_manifest(out_dir: Path, command: str, cfg: RunConfig, started: float, outputs: list[str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if "seed" not in cfg.resolved:  # the seed is always echoed, even when defaulted
        cfg.get("seed", 0)
    payload = {
        "command": command,
        "config": cfg.resolved,
        "seed": cfg.resolved.get("seed"),
        "version": __version__,
        "python": platform.python_version(),
        "started_unix": started,
        "duration_s": round(time.time() - started, 3),
        "outputs": outputs,
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8")


def _manifest_from(cfg: RunConfig) -> DatasetManifest:
    return load_manifest(cfg.require("manifest"))


def _parse_sources(raw: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


def _parse_formats(raw: str | None) -> list[str]:
    if not raw:
        return [f.value for f in CaptionFormat]
    return [s.strip() for s in raw.split(",") if s.strip()]


def _specs_from(cfg: RunConfig):
    path = cfg.get("specs")
    return load_specs(path) if path else default_specs()


def _endpoint_from(cfg: RunConfig, url_key: str) -> ProviderEndpoint | None:
    url = cfg.get(url_key)
    if not url:
        return None
    return ProviderEndpoint(
        base_url=url,
        api_key_env=cfg.get("api_key_env", "") or "",
        max_in_flight=int(cfg.get("max_in_flight", 4)),
        max_retries=int(cfg.get("max_retries", 3)),
        backoff_base_ms=int(cfg.get("backoff_base_ms", 250)),
        timeout_ms=int(cfg.get("timeout_ms", 30_000)),
        rate_limit_per_s=float(cfg.get("rate_limit_per_s", 0.0)),
    )


def _vocab_from(cfg: RunConfig) -> ObjectVocabulary:
    vocab_path = cfg.get("vocab")
    synonyms_path = cfg.get("synonyms")
    if vocab_path:
        return ObjectVocabulary.from_files(vocab_path, synonyms_path)
    return default_vocabulary()


def _collect_errors():
    errors: list[RecordError] = []

    def on_error(event: RecordError) -> None:
        errors.append(event)

    return errors, on_error


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = RunConfig(args, _load_config(args.config))
    started = time.time()
    manifest = _manifest_from(cfg)
    out_dir = Path(cfg.get("out", "stats_out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    scheme = cfg.get("tokenizer", DEFAULT_SCHEME)
    strict = bool(cfg.get("strict", False))
    formats = _parse_formats(cfg.get("formats"))
    seed = int(cfg.get("seed", 0))
    sample_size = int(cfg.get("sample_size", DEFAULT_ENTITY_SAMPLE))
    outputs: list[str] = []

    histograms = {}
    for fmt in formats:
        errors, on_error = _collect_errors()
        hist = token_length_histogram(
            read_records(manifest, strict=strict, on_error=on_error), fmt, scheme=scheme
        )
        csv_path = out_dir / f"hist_{fmt}.csv"
        hist.write_csv(csv_path)
        outputs.append(csv_path.name)
        histograms[fmt] = {
            "total": hist.total,
            "skipped": hist.skipped,
            "underflow": hist.underflow,
            "overflow": hist.overflow,
            "input_errors": len(errors),
        }

    entity_report = entity_diversity(
        read_records(manifest, strict=strict),
        formats,
        sample_size=sample_size,
        seed=seed,
    )

    assert_endpoint = _endpoint_from(cfg, "assert_endpoint")
    provider = AssertionClient(assert_endpoint) if assert_endpoint else None
    try:
        ana_report = ana(read_records(manifest, strict=strict), provider=provider)
    finally:
        if provider is not None:
            provider.close()

    stats = {
        "records_total": manifest.total_records,
        "tokenizer": scheme,
        "histograms": histograms,
        "entities": {
            "per_source": entity_report.per_source,
            "sample_size": entity_report.sample_size,
            "seed": entity_report.seed,
        },
        "ana": {
            "mean_assertions": ana_report.mean_assertions,
            "per_source": {
                k: {"captions": v.captions, "assertions": v.assertions, "mean": v.mean}
                for k, v in ana_report.per_source.items()
            },
            "undefined": ana_report.undefined,
            "partial": ana_report.partial,
        },
    }
    (out_dir / "stats.json").write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    outputs.append("stats.json")
    _write_run_manifest(out_dir, "stats", cfg, started, outputs)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = RunConfig(args, _load_config(args.config))
    started = time.time()
    manifest = _manifest_from(cfg)
    fmt = CaptionFormat.from_key(cfg.require("format"))
    out_dir = Path(cfg.get("out", "validate_out"))
    scheme = cfg.get("tokenizer", DEFAULT_SCHEME)
    specs = _specs_from(cfg)
    strict = bool(cfg.get("strict", False))

    checked = passed = missing = 0
    failures = []
    errors, on_error = _collect_errors()
    for record in read_records(manifest, strict=strict, on_error=on_error):
        caption = record.caption_text(fmt)
        if caption is None:
            missing += 1
            continue
        report = validate(caption, fmt, specs, scheme=scheme, alt_text=record.alt_text)
        checked += 1
        if report.passed:
            passed += 1
        else:
            failures.append(
                {
                    "id": record.id,
                    "token_count": report.token_count,
                    "sentence_count": report.sentence_count,
                    "violations": [
                        {"constraint": v.constraint, "measured": v.measured, "limit": v.limit}
                        for v in report.violations
                    ],
                }
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": fmt.value,
        "tokenizer": scheme,
        "checked": checked,
        "passed": passed,
        "failed": checked - passed,
        "missing_caption": missing,
        "input_errors": len(errors),
        "failures": failures,
    }
    (out_dir / "validation.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _write_run_manifest(out_dir, "validate", cfg, started, ["validation.json"])
    return 0


def _recipe_from(cfg: RunConfig, *, need_ratio: bool) -> MixRecipe:
    pinned = cfg.get("recipe")
    if pinned is not None:  # a full recipe object in the config file wins
        try:
            return MixRecipe.from_dict(pinned)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad recipe in config: {e}") from None
    mode = cfg.get("mode", "ratio_sample")
    sources = _parse_sources(cfg.get("sources", "alt,ssc"))
    ratio = cfg.get("ratio")
    if mode == "ratio_sample" and ratio is None:
        if need_ratio:
            raise ConfigError("missing required option --ratio")
        ratio = 0.0  # sweep overrides per variant
    try:
        return MixRecipe(
            mode=mode,
            sources=sources,
            seed=int(cfg.get("seed", 0)),
            alt_ratio=float(ratio) if ratio is not None else None,
            missing_policy=cfg.get("missing_policy", "fallback_other_source"),
            budget=int(cfg.get("budget")) if cfg.get("budget") is not None else None,
            separator=cfg.get("separator", " "),
            scheme=cfg.get("tokenizer", DEFAULT_SCHEME),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None


def cmd_mix(args: argparse.Namespace) -> int:
    cfg = RunConfig(args, _load_config(args.config))
    started = time.time()
    manifest = _manifest_from(cfg)
    recipe = _recipe_from(cfg, need_ratio=True)
    out_dir = Path(cfg.require("out"))
    max_per_shard = cfg.get("max_per_shard")
    _, report = mix_corpus(
        manifest,
        recipe,
        out_dir,
        max_records_per_shard=int(max_per_shard) if max_per_shard else None,
        workers=int(cfg.get("workers", 1)),
    )
    _write_run_manifest(out_dir, "mix", cfg, started, ["manifest.json", "mix_report.json"])
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _parse_ratios(raw: str) -> list[float]:
    ratios = []
    for piece in str(raw).split(","):
        piece = piece.strip()
        if not piece:
            continue
        value = float(piece)
        if value > 1.0:  # percentage form, e.g. "40" for 0.4
            value = value / 100.0
        ratios.append(value)
    if not ratios:
        raise ConfigError("--ratios must list at least one ratio")
    return ratios


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = RunConfig(args, _load_config(args.config))
    started = time.time()
    manifest = _manifest_from(cfg)
    ratios = _parse_ratios(cfg.require("ratios"))
    base = _recipe_from(cfg, need_ratio=False)
    if base.mode != "ratio_sample":
        raise ConfigError("sweep requires --mode ratio_sample")
    out_root = Path(cfg.require("out"))
    max_per_shard = cfg.get("max_per_shard")
    results = sweep(
        manifest,
        base,
        ratios,
        out_root,
        max_records_per_shard=int(max_per_shard) if max_per_shard else None,
        workers=int(cfg.get("workers", 1)),
    )
    summary = [{"ratio": r, **report.to_dict()} for r, report in results]
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "sweep_report.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    _write_run_manifest(out_root, "sweep", cfg, started, ["sweep_report.json"])
    return 0


def cmd_chair(args: argparse.Namespace) -> int:
    cfg = RunConfig(args, _load_config(args.config))
    started = time.time()
    manifest = _manifest_from(cfg)
    fmt = cfg.require("format")
    vocab = _vocab_from(cfg)
    out_dir = Path(cfg.get("out", "chair_out"))
    strict = bool(cfg.get("strict", False))
    report = chair(read_records(manifest, strict=strict), fmt, vocab)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "chair.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    _write_run_manifest(out_dir, "chair", cfg, started, ["chair.json"])
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_capscore(args: argparse.Namespace) -> int:
    cfg = RunConfig(args, _load_config(args.config))
    started = time.time()
    manifest = _manifest_from(cfg)
    fmt = cfg.require("format")
    out_dir = Path(cfg.get("out", "capscore_out"))
    strict = bool(cfg.get("strict", False))
    use_mock = bool(cfg.get("mock", False))

    vqa_endpoint = _endpoint_from(cfg, "vqa_endpoint")
    if not use_mock and vqa_endpoint is None:
        raise ConfigError("capscore requires --mock or --vqa-endpoint")
    assert_endpoint = _endpoint_from(cfg, "assert_endpoint")
    assertion_provider = AssertionClient(assert_endpoint) if assert_endpoint else None
    if use_mock:
        vqa = GroundedMockVqa.from_records(read_records(manifest, strict=strict))
    else:
        vqa = VqaClient(vqa_endpoint)
    try:
        report = capscore(
            read_records(manifest, strict=strict),
            fmt,
            assertion_provider,
            vqa,
            on_provider_failure=cfg.get("on_provider_failure", "abort"),
            include_details=bool(cfg.get("details", False)),
        )
    finally:
        if assertion_provider is not None:
            assertion_provider.close()
        if isinstance(vqa, VqaClient):
            vqa.close()
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "capscore.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_run_manifest(out_dir, "capscore", cfg, started, ["capscore.json"])
    print(json.dumps({"capscore": report.capscore, "assertions_total": report.assertions_total}, indent=2))
    return 0


def cmd_recaption(args: argparse.Namespace) -> int:
    cfg = RunConfig(args, _load_config(args.config))
    started = time.time()
    manifest = _manifest_from(cfg)
    fmt = CaptionFormat.from_key(cfg.require("format"))
    out_dir = Path(cfg.require("out"))
    use_mock = bool(cfg.get("mock", False))
    endpoint = _endpoint_from(cfg, "endpoint")
    if not use_mock and endpoint is None:
        raise ConfigError("recaption requires --mock or --endpoint")
    client = MockCaptionProvider() if use_mock else CaptionClient(endpoint)
    max_per_shard = cfg.get("max_per_shard")
    try:
        _, stats = recaption_to_shards(
            manifest,
            fmt,
            client,
            out_dir,
            post_process=not bool(cfg.get("no_post_process", False)),
            specs=_specs_from(cfg),
            max_records_per_shard=int(max_per_shard) if max_per_shard else None,
        )
    finally:
        if isinstance(client, CaptionClient):
            client.close()
    (out_dir / "recaption_stats.json").write_text(
        json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    _write_run_manifest(out_dir, "recaption", cfg, started, ["manifest.json", "recaption_stats.json"])
    print(json.dumps(stats.to_dict(), indent=2))
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--manifest", help="input dataset manifest")
    p.add_argument("--out", help="output directory")
    p.add_argument("--tokenizer", choices=available_schemes(), help="tokenization scheme")
    p.add_argument("--seed", type=int, help="seed for all randomized steps (echoed in outputs)")
    p.add_argument("--workers", type=int, help="parallel workers (same outputs for any N)")
    p.add_argument("--strict", action="store_const", const=True, help="abort on malformed lines / checksums")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capmix", description=__doc__)
    parser.add_argument("--version", action="version", version=f"capmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="token-length histograms, entity diversity, assertion counts")
    _add_common(p)
    p.add_argument("--formats", help="comma-separated caption sources (default: all)")
    p.add_argument("--sample-size", dest="sample_size", type=int, help="entity sample size")
    p.add_argument("--assert-endpoint", dest="assert_endpoint", help="assertion LLM endpoint URL")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("validate", help="check captions against a format's constraints")
    _add_common(p)
    p.add_argument("--format", help="caption format to validate")
    p.add_argument("--specs", help="JSON spec registry overriding default bands")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("mix", help="materialize one mixed training dataset")
    _add_common(p)
    p.add_argument("--mode", choices=["ratio_sample", "concat", "union_uniform"])
    p.add_argument("--ratio", type=float, help="probability of the first source (alt side)")
    p.add_argument("--sources", help="comma-separated sources, e.g. alt,ssc")
    p.add_argument("--budget", type=int, help="token budget with whole-token truncation")
    p.add_argument("--separator", help="concat separator (default single space)")
    p.add_argument("--missing-policy", dest="missing_policy",
                   choices=["skip_record", "fallback_other_source", "error"])
    p.add_argument("--max-per-shard", dest="max_per_shard", type=int)
    p.set_defaults(fn=cmd_mix)

    p = sub.add_parser("sweep", help="one dataset variant per mixing ratio")
    _add_common(p)
    p.add_argument("--ratios", help="comma-separated ratios; values above 1 are percentages")
    p.add_argument("--mode", choices=["ratio_sample"])
    p.add_argument("--sources", help="comma-separated sources, e.g. alt,ssc")
    p.add_argument("--budget", type=int)
    p.add_argument("--separator")
    p.add_argument("--missing-policy", dest="missing_policy",
                   choices=["skip_record", "fallback_other_source", "error"])
    p.add_argument("--max-per-shard", dest="max_per_shard", type=int)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("chair", help="object-hallucination scores against gt_objects")
    _add_common(p)
    p.add_argument("--format", help="caption source to score")
    p.add_argument("--vocab", help="canonical objects file (one per line)")
    p.add_argument("--synonyms", help="synonym file (surface<TAB>canonical)")
    p.set_defaults(fn=cmd_chair)

    p = sub.add_parser("capscore", help="VQA-verified assertion accuracy (0-100)")
    _add_common(p)
    p.add_argument("--format", help="caption source to score")
    p.add_argument("--mock", action="store_const", const=True,
                   help="use the deterministic grounded mock VQA")
    p.add_argument("--vqa-endpoint", dest="vqa_endpoint", help="VQA provider endpoint URL")
    p.add_argument("--assert-endpoint", dest="assert_endpoint", help="assertion LLM endpoint URL")
    p.add_argument("--on-provider-failure", dest="on_provider_failure", choices=["abort", "skip"])
    p.add_argument("--details", action="store_const", const=True, help="include per-record detail")
    p.set_defaults(fn=cmd_capscore)

    p = sub.add_parser("recaption", help="generate captions for a corpus via a provider")
    _add_common(p)
    p.add_argument("--format", help="caption format to generate")
    p.add_argument("--mock", action="store_const", const=True, help="use the echo mock captioner")
    p.add_argument("--endpoint", help="captioner endpoint URL")
    p.add_argument("--no-post-process", dest="no_post_process", action="store_const", const=True)
    p.add_argument("--specs", help="JSON spec registry for post-processing")
    p.set_defaults(fn=cmd_recaption)

    for sp in sub.choices.values():
        sp.add_argument("--api-key-env", dest="api_key_env", help=argparse.SUPPRESS)
        sp.add_argument("--max-in-flight", dest="max_in_flight", type=int, help=argparse.SUPPRESS)
        sp.add_argument("--max-retries", dest="max_retries", type=int, help=argparse.SUPPRESS)
        sp.add_argument("--backoff-base-ms", dest="backoff_base_ms", type=int, help=argparse.SUPPRESS)
        sp.add_argument("--timeout-ms", dest="timeout_ms", type=int, help=argparse.SUPPRESS)
        sp.add_argument("--rate-limit", dest="rate_limit_per_s", type=float, help=argparse.SUPPRESS)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, MalformedSyntax, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (IoFailure, ShardMissing, ChecksumMismatch, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ProviderFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except CapmixError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
