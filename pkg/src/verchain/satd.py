"""Self-admitted technical debt: keyword comments, linked snippets, per-version lifecycle."""

from __future__ import annotations

import re
import statistics
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .lexer import BraceImbalance, Comment, MethodSpan, TokenStream, extract_methods, normalized_code, tokenize

DEFAULT_KEYWORDS = (
    "todo", "fix", "fixme", "deprecated", "refactor", "temporary", "wip", "work in progress", "workaround",
)

INTRODUCED = "Introduced"
RESOLVED = "Resolved"
INCONSISTENT_REMOVAL = "InconsistentCommentRemoval"
PERSISTS = "PersistsDespiteCodeChange"


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class SatdInstance:
    comment_text: str
    matched_keyword: str
    snippet: str
    location: str


@dataclass(frozen=True)
class DebtEvent:
    kind: str
    comment_text: str


@dataclass
class VersionDebt:
    """What the tracker needs from one version: its debt and its comment-free code."""

    version_index: int
    instances: list[SatdInstance]
    code: str = ""
    methods: dict[str, list[str]] = field(default_factory=dict)  # name -> normalized bodies


@dataclass
class DebtTimeline:
    family: tuple[str, str]  # (name, deployer)
    per_version: list[tuple[int, list[SatdInstance], list[DebtEvent]]] = field(default_factory=list)

    def events(self, kind: str | None = None) -> list[DebtEvent]:
        return [e for _, _, events in self.per_version for e in events if kind is None or e.kind == kind]

    @property
    def initial_debt(self) -> int:
        return len(self.per_version[0][1]) if self.per_version else 0

    def to_dict(self) -> dict:
        return {
            "name": self.family[0],
            "deployer": self.family[1],
            "versions": [
                {"version": idx, "instances": [asdict(i) for i in inst], "events": [asdict(e) for e in ev]}
                for idx, inst, ev in self.per_version
            ],
        }


@dataclass(frozen=True)
class DebtStats:
    families: int
    families_with_initial_debt: int
    mean_initial_debt: float
    median_initial_debt: float
    pct_with_removal: float
    pct_defined: bool


def load_keywords(path: str | Path) -> tuple[str, ...]:
    words = []
    for line in Path(path).read_text().splitlines():
        text = " ".join(line.split("#", 1)[0].lower().split())
        if text:
            words.append(text)
    return tuple(words)


def normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


def _keyword_pattern(keyword: str) -> re.Pattern:
    parts = [re.escape(p) for p in keyword.split()]
    return re.compile(r"\b" + r"\s+".join(parts) + r"\b", re.IGNORECASE)


def match_keyword(text: str, keywords=DEFAULT_KEYWORDS) -> str | None:
    """First keyword (in list order) occurring as a whole word or phrase in ``text``."""
    for keyword in keywords:
        if _keyword_pattern(keyword).search(text):
            return keyword
    return None


def detect_satd(comments: list[Comment], keywords=DEFAULT_KEYWORDS) -> list[tuple[Comment, str]]:
    """Debt-bearing comments paired with their matched keyword, one per comment."""
    found = []
    for comment in comments:
        keyword = match_keyword(comment.text, keywords)
        if keyword is not None:
            found.append((comment, keyword))
    return found


def _statement_after(stream: TokenStream, offset: int) -> str:
    """Code from ``offset`` to the end of the next statement or brace block."""
    collected = []
    depth = 0
    for tok in stream.tokens:
        if tok.offset < offset:
            continue
        if tok.text == "}" and depth == 0:
            break  # closing an enclosing block we never entered
        collected.append(tok)
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1
            if depth == 0:
                break
        elif tok.text == ";" and depth == 0:
            break
    return normalized_code(collected)


def link_snippet(comment: Comment, stream: TokenStream, spans: list[MethodSpan]) -> tuple[str, str]:
    """(snippet, location) for a comment: its enclosing method body, else the next file-scope block."""
    for span in spans:
        if span.start_offset <= comment.offset < span.end_offset:
            return normalized_code(span.body_tokens.tokens), span.name
    return _statement_after(stream, comment.offset), "file-scope"


def scan_version(source: str, version_index: int, keywords=DEFAULT_KEYWORDS) -> VersionDebt:
    stream = tokenize(source)
    try:
        spans = extract_methods(stream)
    except BraceImbalance:
        spans = []
    instances = []
    for comment, keyword in detect_satd(stream.comments, keywords):
        snippet, location = link_snippet(comment, stream, spans)
        instances.append(SatdInstance(normalize_text(comment.text), keyword, snippet, location))
    methods: dict[str, list[str]] = defaultdict(list)
    for span in spans:
        methods[span.name].append(normalized_code(span.body_tokens.tokens))
    return VersionDebt(version_index, instances, normalized_code(stream.tokens), dict(methods))


def _pair_up(before: list[SatdInstance], after: list[SatdInstance]):
    """Match instances by comment text, nth occurrence to nth occurrence."""
    queues: dict[str, list[SatdInstance]] = defaultdict(list)
    for inst in after:
        queues[inst.comment_text].append(inst)
    matched, removed = [], []
    for inst in before:
        queue = queues.get(inst.comment_text)
        if queue:
            matched.append((inst, queue.pop(0)))
        else:
            removed.append(inst)
    introduced = [inst for queue in queues.values() for inst in queue]
    return matched, removed, introduced


def _snippet_survives(old: SatdInstance, version: VersionDebt) -> bool:
    """Whether the code a removed comment was attached to is still there, unchanged."""
    if old.location != "file-scope":
        return old.snippet in version.methods.get(old.location, [])
    if not old.snippet:
        return True
    return f" {old.snippet} " in f" {version.code} "


def track_evolution(family: tuple[str, str], versions: list[VersionDebt]) -> DebtTimeline:
    """Classify what happens to each debt comment between consecutive versions.

    Removed comment + changed code is a resolution; removed comment with its
    snippet unchanged (same-named method body, or the file-scope statement
    still present verbatim) is an inconsistent removal; a kept
    comment whose snippet changed persists despite the change.
    """
    ordered = sorted(versions, key=lambda v: v.version_index)
    timeline = DebtTimeline(family)
    if not ordered:
        return timeline
    timeline.per_version.append((ordered[0].version_index, list(ordered[0].instances), []))
    for prev, cur in zip(ordered, ordered[1:]):
        matched, removed, introduced = _pair_up(prev.instances, cur.instances)
        events = []
        for old in removed:
            kind = INCONSISTENT_REMOVAL if _snippet_survives(old, cur) else RESOLVED
            events.append(DebtEvent(kind, old.comment_text))
        for old, new in matched:
            if old.snippet != new.snippet:
                events.append(DebtEvent(PERSISTS, old.comment_text))
        events.extend(DebtEvent(INTRODUCED, inst.comment_text) for inst in introduced)
        timeline.per_version.append((cur.version_index, list(cur.instances), events))
    return timeline


def debt_stats(timelines: list[DebtTimeline]) -> DebtStats:
    if not timelines:
        raise EmptyInput("no timelines")
    initial = [t.initial_debt for t in timelines]
    indebted = [t for t in timelines if t.initial_debt > 0]
    removed = sum(1 for t in indebted if t.events(RESOLVED))
    defined = bool(indebted)
    return DebtStats(
        families=len(timelines),
        families_with_initial_debt=len(indebted),
        mean_initial_debt=statistics.fmean(initial),
        median_initial_debt=float(statistics.median(initial)),
        pct_with_removal=100.0 * removed / len(indebted) if defined else 0.0,
        pct_defined=defined,
    )


def event_counts(timeline: DebtTimeline) -> Counter:
    return Counter(e.kind for e in timeline.events())
