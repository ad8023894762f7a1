"""SLOC, McCabe, Halstead Volume and Maintainability Index for Solidity code."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

from .lexer import (
    DECISION_WORDS,
    GROUPING,
    BraceImbalance,
    TokenStream,
    extract_methods,
    tokenize,
)

CSV_HEADER = ("subject", "level", "sloc", "mccabe", "halstead_volume", "maintainability_index")


@dataclass(frozen=True)
class MetricsRecord:
    subject: str
    level: str
    sloc: int
    mccabe: int
    halstead_volume: float
    maintainability_index: float


def sloc(stream: TokenStream) -> int:
    """Number of distinct lines carrying at least one code token."""
    return len({tok.line for tok in stream.tokens})


def mccabe(stream: TokenStream) -> int:
    """One plus the number of decision points (if/while/for/do/catch and ternary ``?``)."""
    points = sum(
        1 for tok in stream.tokens
        if (tok.kind == "keyword" and tok.text in DECISION_WORDS) or (tok.kind == "operator" and tok.text == "?")
    )
    return 1 + points


def halstead_counts(stream: TokenStream) -> tuple[int, int, int, int]:
    """(N1, n1, N2, n2): total/distinct operators and total/distinct operands.

    Identifiers and literals are operands.  Keywords, operators and brackets
    are operators, except the grouping-only ``; { } ( ) ,``.
    """
    operators: list[str] = []
    operands: list[str] = []
    for tok in stream.tokens:
        if tok.kind in ("identifier", "literal"):
            operands.append(tok.text)
        elif tok.text not in GROUPING:
            operators.append(tok.text)
    return len(operators), len(set(operators)), len(operands), len(set(operands))


def halstead_volume(stream: TokenStream) -> float:
    big_n1, n1, big_n2, n2 = halstead_counts(stream)
    length, vocabulary = big_n1 + big_n2, n1 + n2
    if length == 0 or vocabulary == 0:
        return 0.0
    return length * math.log2(vocabulary)


def maintainability_index(sloc: int, mccabe: int, hv: float) -> float:
    """171 - 5.2 ln(HV) - 0.23 CC - 16.2 ln(SLOC), with HV and SLOC clamped to >= 1."""
    return 171 - 5.2 * math.log(max(hv, 1.0)) - 0.23 * mccabe - 16.2 * math.log(max(sloc, 1))


def measure(stream: TokenStream, subject: str, level: str) -> MetricsRecord:
    s, cc, hv = sloc(stream), mccabe(stream), halstead_volume(stream)
    return MetricsRecord(subject, level, s, cc, hv, maintainability_index(s, cc, hv))


def analyze(source: str, level: str = "file", subject: str = "<source>") -> list[MetricsRecord]:
    """One record for the whole file, or one per method span.

    Method records are named ``<subject>::<method>``.  Raises
    :class:`~verchain.lexer.BraceImbalance` at method level when spans cannot
    be matched.
    """
    stream = tokenize(source)
    if level == "file":
        return [measure(stream, subject, "file")]
    if level != "method":
        raise ValueError(f"level must be 'file' or 'method', not {level!r}")
    return [measure(span.body_tokens, f"{subject}::{span.name}", "method") for span in extract_methods(stream)]


def to_csv(records: list[MetricsRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.subject, r.level, r.sloc, r.mccabe, repr(r.halstead_volume), repr(r.maintainability_index)])
    return buffer.getvalue()


def from_csv(text: str) -> list[MetricsRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected metrics header: {reader.fieldnames}")
    return [
        MetricsRecord(row["subject"], row["level"], int(row["sloc"]), int(row["mccabe"]),
                      float(row["halstead_volume"]), float(row["maintainability_index"]))
        for row in reader
    ]


def to_json(records: list[MetricsRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=2, sort_keys=True) + "\n"


__all__ = [
    "MetricsRecord", "sloc", "mccabe", "halstead_counts", "halstead_volume", "maintainability_index",
    "measure", "analyze", "to_csv", "from_csv", "to_json", "BraceImbalance", "CSV_HEADER",
]
