"""Correlation coefficients, vulnerability aggregation, timelines and version histograms."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as _sp

METRIC_COLUMNS = ("SLOC", "McCabe", "HV", "MI")
VULN_COLUMN = "Vulnerability"
STRONG, MODERATE = 0.8, 0.5


class DegenerateSeries(ValueError):
    pass


class InsufficientData(ValueError):
    pass


def _pair(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    a, b = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError("series must be one-dimensional and of equal length")
    if len(a) < 2:
        raise DegenerateSeries("need at least two points")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("series must be finite")
    return a, b


def _clip(r: float) -> float:
    return float(min(1.0, max(-1.0, r)))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    a, b = _pair(x, y)
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise DegenerateSeries("constant series has no correlation")
    da, db = a - a.mean(), b - b.mean()
    return _clip(np.dot(da, db) / math.sqrt(np.dot(da, da) * np.dot(db, db)))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    a, b = _pair(x, y)
    return pearson(_sp.rankdata(a), _sp.rankdata(b))


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected Kendall tau-b."""
    a, b = _pair(x, y)
    tau = _sp.kendalltau(a, b, variant="b").statistic
    if not math.isfinite(tau):
        raise DegenerateSeries("all pairs tied in one series")
    return _clip(tau)


def strength(r: float) -> str:
    if not math.isfinite(r):
        return "undefined"
    magnitude = abs(r)
    if magnitude > STRONG:
        return "strong"
    if magnitude > MODERATE:
        return "moderate"
    return "weak"


@dataclass(frozen=True)
class CorrelationResult:
    pair_label: str
    pearson: float
    spearman: float
    kendall_tau: float

    @property
    def strengths(self) -> tuple[str, str, str]:
        return strength(self.pearson), strength(self.spearman), strength(self.kendall_tau)


def correlate(label: str, x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """All three coefficients; a coefficient undefined for these series is NaN."""
    values = []
    for fn in (pearson, spearman, kendall_tau):
        try:
            values.append(fn(x, y))
        except DegenerateSeries:
            values.append(float("nan"))
    return CorrelationResult(label, *values)


@dataclass
class VulnerabilityReport:
    address: str
    name: str
    deployer: str
    findings: list[tuple[str, str, int]] = field(default_factory=list)  # (detector_id, severity, count)

    @property
    def total(self) -> int:
        return aggregate_vulnerabilities(self.findings)

    def to_dict(self) -> dict:
        return {
            "address": self.address, "name": self.name, "deployer": self.deployer,
            "findings": [{"detector_id": d, "severity": s, "count": c} for d, s, c in self.findings],
        }


def aggregate_vulnerabilities(findings: Iterable) -> int:
    """Sum of finding counts; every detector weighs one."""
    total = 0
    for finding in findings:
        if isinstance(finding, Mapping):
            count = finding["count"]
        else:
            count = finding[-1]
        if count < 0:
            raise ValueError("finding counts must be non-negative")
        total += count
    return total


def load_reports(text: str) -> list[VulnerabilityReport]:
    reports = []
    for item in json.loads(text):
        findings = [(str(f["detector_id"]), str(f.get("severity", "")), int(f["count"]))
                    for f in item.get("findings", [])]
        reports.append(VulnerabilityReport(str(item["address"]).lower(), str(item.get("name", "")),
                                           str(item.get("deployer", "")).lower(), findings))
    return reports


def dump_reports(reports: list[VulnerabilityReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def from_slither(slither_json: Mapping, address: str, name: str = "", deployer: str = "") -> VulnerabilityReport:
    """Fold Slither's ``results.detectors`` list (one finding per element) into a report."""
    detectors = (slither_json.get("results") or {}).get("detectors") or []
    counts = Counter((str(d.get("check", "unknown")), str(d.get("impact", ""))) for d in detectors)
    findings = [(check, impact, n) for (check, impact), n in sorted(counts.items())]
    return VulnerabilityReport(address.lower(), name, deployer.lower(), findings)


def correlation_matrix(rows: Mapping[str, Mapping[str, float]],
                       vuln_totals: Mapping[str, int]) -> tuple[list[CorrelationResult], list[str]]:
    """Metric-metric and metric-vulnerability correlations over joined contracts.

    ``rows`` maps a contract key to its SLOC/McCabe/HV/MI values; keys without
    a vulnerability total are dropped and reported in the diagnostics list.
    """
    keys = sorted(k for k in rows if k in vuln_totals)
    missing = sorted(k for k in rows if k not in vuln_totals)
    diagnostics = [f"dropped {len(missing)} contract(s) without a vulnerability report"] if missing else []
    if len(keys) < 2:
        raise InsufficientData(f"only {len(keys)} joined row(s); need at least 2")
    columns = {m: [float(rows[k][m]) for k in keys] for m in METRIC_COLUMNS}
    columns[VULN_COLUMN] = [float(vuln_totals[k]) for k in keys]
    results = []
    for i, first in enumerate(METRIC_COLUMNS):
        for second in METRIC_COLUMNS[i + 1:]:
            results.append(correlate(f"{first}-{second}", columns[first], columns[second]))
    for metric in METRIC_COLUMNS:
        results.append(correlate(f"{metric}-{VULN_COLUMN}", columns[metric], columns[VULN_COLUMN]))
    return results, diagnostics


def correlations_csv(results: list[CorrelationResult]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["pair", "pearson", "spearman", "kendall_tau",
                     "pearson_strength", "spearman_strength", "kendall_tau_strength"])
    for r in results:
        writer.writerow([r.pair_label, *(f"{v:.5f}" for v in (r.pearson, r.spearman, r.kendall_tau)), *r.strengths])
    return buffer.getvalue()


@dataclass(frozen=True)
class VulnerabilityTimeline:
    name: str
    deployer: str
    totals: tuple[int, ...]
    changed: bool


def vulnerability_timeline(family: tuple[str, str], totals: Sequence[int]) -> VulnerabilityTimeline:
    """Per-version totals in version order; ``changed`` is False iff all totals agree."""
    if not totals:
        raise ValueError("family has no analyzed versions")
    return VulnerabilityTimeline(family[0], family[1], tuple(totals), len(set(totals)) > 1)


HISTOGRAM_BUCKETS = ("1", "2-10", ">10")


def version_histogram(version_counts: Iterable[int]) -> dict[str, dict[str, float]]:
    counts = {bucket: 0 for bucket in HISTOGRAM_BUCKETS}
    for n in version_counts:
        if n < 1:
            continue
        counts["1" if n == 1 else "2-10" if n <= 10 else ">10"] += 1
    total = sum(counts.values())
    return {
        bucket: {"count": counts[bucket], "percent": round(100.0 * counts[bucket] / total, 2) if total else 0.0}
        for bucket in HISTOGRAM_BUCKETS
    }
