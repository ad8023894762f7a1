"""Command-line pipeline: extract -> analyze -> satd -> correlate -> report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import metrics as metrics_mod
from . import satd as satd_mod
from . import stats as stats_mod
from . import store
from .gateway import Gateway, GatewayError, HttpTransport, RateLimiter, load_keys
from .lexer import BraceImbalance
from .linker import (
    DEFAULT_MAX_VERSIONS,
    ContractFamily,
    MalformedChain,
    UnresolvedDeployer,
    collect_proxy_family,
    collect_versions,
    filter_anomalous,
)

logger = logging.getLogger("verchain")

EXIT_OK, EXIT_FAILURE, EXIT_PARTIAL = 0, 1, 2


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        entry = {"level": record.levelname, "logger": record.name, "msg": record.getMessage()}
        entry.update(getattr(record, "fields", {}))
        return json.dumps(entry, sort_keys=True)


def _log(severity: int, msg: str, **fields) -> None:
    logger.log(severity, msg, extra={"fields": fields})


@dataclass
class RunConfig:
    input: Path
    output: Path
    keys: Path | None = None
    workers: int = 3
    max_versions: int = DEFAULT_MAX_VERSIONS
    fixtures: Path | None = None
    keywords: Path | None = None
    level: str = "file"
    vulns: Path | None = None

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_versions < 1:
            raise ValueError("max_versions must be >= 1")


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _gateway(config: RunConfig) -> Gateway:
    if config.fixtures is not None:
        return Gateway.from_fixtures(config.fixtures)
    keys = load_keys(config.keys) if config.keys and config.keys.exists() else []
    if not keys:
        _log(logging.WARNING, "no API keys; anonymous rate limit applies")
    return Gateway(HttpTransport(), RateLimiter(keys))


def partition(items: list, parts: int) -> list[list]:
    """Split into ``parts`` contiguous, near-equal slices."""
    size, extra = divmod(len(items), parts)
    slices, start = [], 0
    for i in range(parts):
        end = start + size + (1 if i < extra else 0)
        slices.append(items[start:end])
        start = end
    return slices


def _extract_slice(seeds: list[tuple[str, str]], gateway: Gateway, config: RunConfig):
    families: list[ContractFamily] = []
    failures: list[dict] = []
    covered: set[str] = set()
    for address, name in seeds:
        if address in covered:
            continue
        try:
            found = [collect_versions(address, gateway)]
            if gateway.get_verified_source(address).is_proxy:
                found.append(collect_proxy_family(address, gateway))
        except (GatewayError, UnresolvedDeployer, MalformedChain, ValueError) as exc:
            _log(logging.WARNING, "seed failed", address=address, name=name, error=type(exc).__name__)
            failures.append({"address": address, "error": f"{type(exc).__name__}: {exc}"})
            continue
        for family in found:
            covered.update(v.address for v in family.versions)
            if not filter_anomalous(family, config.max_versions):
                store.write_family(config.output, family)
            families.append(family)
    return families, failures


def cmd_extract(config: RunConfig) -> tuple[dict, int]:
    if not Path(config.input).is_dir():
        raise FileNotFoundError(f"input dataset {config.input} is not a directory")
    seeds = store.iter_sanctuary(config.input)
    gateway = _gateway(config)
    slices = partition(seeds, config.workers)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(lambda s: _extract_slice(s, gateway, config), slices))

    unique: dict[tuple[str, str], ContractFamily] = {}
    failures = []
    for families, failed in results:
        failures.extend(failed)
        for family in families:
            unique.setdefault((family.identity.name, family.identity.deployer), family)
    kept = {k: f for k, f in unique.items() if not filter_anomalous(f, config.max_versions)}
    excluded = sorted(
        ({"name": k[0], "deployer": k[1], "versions": len(f)} for k, f in unique.items() if k not in kept),
        key=lambda e: (e["name"], e["deployer"]),
    )
    manifest = {
        "seeds": len(seeds),
        "families": len(kept),
        "versions": sum(len(f) for f in kept.values()),
        "excluded_anomalous": len(excluded),
        "excluded": excluded,
        "max_versions": config.max_versions,
        "unverified_candidates": sum(len(f.unverified) for f in kept.values()),
        "failed_seeds": sorted(failures, key=lambda f: f["address"]),
    }
    store.write_manifest(config.output, manifest)
    _log(logging.INFO, "extract finished", families=len(kept), excluded=len(excluded), failed=len(failures))
    if seeds and len(failures) == len(seeds):
        return manifest, EXIT_FAILURE
    return manifest, EXIT_PARTIAL if failures else EXIT_OK


def _families(config: RunConfig) -> list[ContractFamily]:
    return list(store.read_families(config.input))


def cmd_analyze(config: RunConfig) -> tuple[list[metrics_mod.MetricsRecord], int]:
    records, skipped = [], 0
    for family in _families(config):
        for path, version in zip(store.family_paths(config.input, family), family.versions):
            subject = path.relative_to(config.input).as_posix()
            try:
                records.extend(metrics_mod.analyze(version.source.source_text, config.level, subject))
            except BraceImbalance as exc:
                skipped += 1
                _log(logging.WARNING, "file skipped", subject=subject, error=str(exc))
    config.output.mkdir(parents=True, exist_ok=True)
    (config.output / f"metrics_{config.level}.csv").write_text(metrics_mod.to_csv(records))
    (config.output / f"metrics_{config.level}.json").write_text(metrics_mod.to_json(records))
    _log(logging.INFO, "analyze finished", records=len(records), skipped=skipped, level=config.level)
    return records, EXIT_PARTIAL if skipped else EXIT_OK


def _keywords(config: RunConfig) -> tuple[str, ...]:
    return satd_mod.load_keywords(config.keywords) if config.keywords else satd_mod.DEFAULT_KEYWORDS


def build_timelines(families: list[ContractFamily], keywords) -> list[satd_mod.DebtTimeline]:
    timelines = []
    for family in families:
        scanned = [satd_mod.scan_version(v.source.source_text, v.version_index, keywords)
                   for v in family.versions if v.source is not None]
        timelines.append(satd_mod.track_evolution((family.identity.name, family.identity.deployer), scanned))
    return timelines


def _stats_dict(timelines) -> dict:
    try:
        return asdict(satd_mod.debt_stats(timelines))
    except satd_mod.EmptyInput:
        return asdict(satd_mod.DebtStats(0, 0, 0.0, 0.0, 0.0, False))


def cmd_satd(config: RunConfig) -> tuple[dict, int]:
    timelines = build_timelines(_families(config), _keywords(config))
    stats = _stats_dict(timelines)
    _write_json(config.output / "satd_timeline.json", [t.to_dict() for t in timelines])
    _write_json(config.output / "satd_stats.json", stats)
    _log(logging.INFO, "satd finished", families=len(timelines))
    return stats, EXIT_OK


def _vuln_totals(path: Path) -> dict[str, int]:
    return {r.address: r.total for r in stats_mod.load_reports(path.read_text())}


def cmd_correlate(config: RunConfig) -> tuple[list[stats_mod.CorrelationResult], int]:
    if config.vulns is None:
        raise ValueError("correlate needs --vulns")
    records = metrics_mod.from_csv(Path(config.input).read_text())
    rows = {}
    for r in records:
        if r.level != "file":
            continue
        address = store.parse_version_name(Path(r.subject).name)[0]
        rows[address] = {"SLOC": r.sloc, "McCabe": r.mccabe, "HV": r.halstead_volume, "MI": r.maintainability_index}
    results, diagnostics = stats_mod.correlation_matrix(rows, _vuln_totals(config.vulns))
    for line in diagnostics:
        _log(logging.INFO, line)
    config.output.mkdir(parents=True, exist_ok=True)
    (config.output / "correlations.csv").write_text(stats_mod.correlations_csv(results))
    return results, EXIT_OK


def cmd_report(config: RunConfig) -> tuple[dict, int]:
    families = _families(config) if Path(config.input).is_dir() else []
    histogram = stats_mod.version_histogram(len(f) for f in families)
    timelines = []
    if config.vulns is not None:
        totals = _vuln_totals(config.vulns)
        for family in families:
            series = [totals[v.address] for v in family.versions if v.address in totals]
            if series:
                t = stats_mod.vulnerability_timeline((family.identity.name, family.identity.deployer), series)
                timelines.append(asdict(t))
    manifest_path = Path(config.input) / "manifest.json"
    summary = {
        "families": len(families),
        "versions": sum(len(f) for f in families),
        "histogram": histogram,
        "debt": _stats_dict(build_timelines(families, _keywords(config))),
        "vulnerability_timelines": len(timelines),
        "families_with_vulnerability_change": sum(1 for t in timelines if t["changed"]),
        "manifest": json.loads(manifest_path.read_text()) if manifest_path.exists() else None,
    }
    _write_json(config.output / "histogram.json", histogram)
    _write_json(config.output / "timelines.json", timelines)
    _write_json(config.output / "summary.json", summary)
    return summary, EXIT_OK


COMMANDS = {
    "extract": cmd_extract,
    "analyze": cmd_analyze,
    "satd": cmd_satd,
    "correlate": cmd_correlate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verchain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", type=Path, required=True)
        p.add_argument("--output", type=Path, required=True)
        p.add_argument("--keys", type=Path)
        p.add_argument("--workers", type=int, default=3)
        p.add_argument("--max-versions", type=int, default=DEFAULT_MAX_VERSIONS)
        p.add_argument("--fixtures", type=Path)
        p.add_argument("--level", choices=("file", "method"), default="file")
        p.add_argument("--keywords", type=Path)
        p.add_argument("--vulns", type=Path)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter())
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, handlers=[handler], force=True)
    try:
        config = RunConfig(args.input, args.output, args.keys, args.workers, args.max_versions,
                           args.fixtures, args.keywords, args.level, args.vulns)
        _, code = COMMANDS[args.command](config)
    except (OSError, ValueError, stats_mod.InsufficientData) as exc:
        _log(logging.ERROR, "command failed", command=args.command, error=f"{type(exc).__name__}: {exc}")
        return EXIT_FAILURE
    return code


if __name__ == "__main__":
    sys.exit(main())
