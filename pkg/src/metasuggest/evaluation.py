"""Offline evaluation: log ingestion, sessionization, and session metrics.

A suggestion source (the full meta-suggestion pipeline or a single engine)
is scored by how well it predicts the queries a user actually issued later
in the same session. Sessions come from timestamp gap-splitting, which for
a 1-D feature with a minimum cluster size of one is exactly density-based
clustering with radius ``eps``.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

from .core import Query, RerankConfig, normalize_query, run_msa, similarity
from .engines import EngineSpec, fetch_all, fetch_one, ok_suggestion_lists

__all__ = [
    "QueryLogEntry",
    "QuerySession",
    "EvalReport",
    "LogFormatError",
    "sessionize",
    "hit",
    "relevance_default",
    "ndcg",
    "compute_metrics",
    "hit_rank_histogram",
    "read_query_log",
    "format_report_table",
    "make_msa_suggester",
    "make_engine_suggester",
]

Suggester = Callable[[str], Sequence[str]]
RelevanceFn = Callable[[str, frozenset[str]], float]


class LogFormatError(ValueError):
    """Query log file cannot be parsed into valid entries."""


@dataclass(frozen=True)
class QueryLogEntry:
    """One timestamped query issued by one user."""

    timestamp: float
    query: str
    user: str


@dataclass(frozen=True)
class QuerySession:
    """A user's consecutive queries, ordered by timestamp."""

    user: str
    entries: tuple[QueryLogEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))


@dataclass(frozen=True)
class EvalReport:
    """Metric bundle for one suggestion source at one cutoff.

    ``ahr``/``nahr`` are None (undefined) when nothing was hit. The exact
    identities ``precision * cutoff == recall`` and ``nahr * cutoff == ahr``
    hold by construction.
    """

    label: str
    cutoff: int
    no_q: int
    hits: int
    recall: float
    precision: float
    ahr: float | None
    nahr: float | None
    ndcg: float
    hit_rank_histogram: dict[int, int]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "cutoff": self.cutoff,
            "no_q": self.no_q,
            "hits": self.hits,
            "recall": self.recall,
            "precision": self.precision,
            "ahr": self.ahr,
            "nahr": self.nahr,
            "ndcg": self.ndcg,
            "hit_rank_histogram": {str(rank): count for rank, count in sorted(self.hit_rank_histogram.items())},
        }


def sessionize(entries: Sequence[QueryLogEntry], eps: float = 30.0) -> list[QuerySession]:
    """Split each user's timeline into sessions at gaps larger than ``eps``.

    Consecutive gaps of exactly ``eps`` stay joined. Every entry lands in
    exactly one session; users are processed in first-appearance order.
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    per_user: dict[str, list[QueryLogEntry]] = {}
    for entry in entries:
        per_user.setdefault(entry.user, []).append(entry)
    sessions = []
    for user, user_entries in per_user.items():
        ordered = sorted(user_entries, key=lambda e: e.timestamp)
        run = [ordered[0]]
        for entry in ordered[1:]:
            if entry.timestamp - run[-1].timestamp <= eps:
                run.append(entry)
            else:
                sessions.append(QuerySession(user, tuple(run)))
                run = [entry]
        sessions.append(QuerySession(user, tuple(run)))
    return sessions


def hit(sugg: Sequence[str], after: Iterable[str]) -> int | None:
    """1-based rank of the first suggestion the user actually searched later."""
    after_set = set(after)
    for position, suggestion in enumerate(sugg, start=1):
        if suggestion in after_set:
            return position
    return None


def relevance_default(suggestion: str, after: frozenset[str]) -> float:
    """Lexical relevance in [0, 1]: best character overlap with any later query.

    Stands in for a semantic model; any scorer with this signature can be
    passed to :func:`compute_metrics` instead.
    """
    if not after:
        return 0.0
    return max(similarity(suggestion, later) for later in after) / 100.0


def ndcg(ranked_relevances: Sequence[float], gain: str = "linear") -> float:
    """Normalized discounted cumulative gain of a relevance vector.

    ``gain="linear"`` discounts the raw relevance; ``"exponential"`` uses
    ``2**rel - 1``. Defined as 0 when the ideal ordering also scores 0.
    """
    if gain == "linear":
        gains = list(ranked_relevances)
    elif gain == "exponential":
        gains = [2.0**rel - 1.0 for rel in ranked_relevances]
    else:
        raise ValueError(f"unknown gain model {gain!r}")
    dcg = sum(g / math.log2(position + 1) for position, g in enumerate(gains, start=1))
    ideal = sorted(gains, reverse=True)
    idcg = sum(g / math.log2(position + 1) for position, g in enumerate(ideal, start=1))
    if idcg == 0:
        return 0.0
    return dcg / idcg


def compute_metrics(
    sessions: Sequence[QuerySession],
    suggester: Suggester,
    cutoff: int,
    *,
    relevance_fn: RelevanceFn = relevance_default,
    gain: str = "linear",
    ahr_mode: str = "suggestion_rank",
    include_terminal: bool = False,
    label: str = "",
) -> EvalReport:
    """Score a suggestion source against what users searched next.

    For every session query with a non-empty set of later queries, the
    suggester's top-``cutoff`` list is checked for a hit and scored for
    rank-discounted relevance. Terminal queries (nothing follows them in
    the session) cannot hit and are excluded from the denominator unless
    ``include_terminal`` is set. ``ahr_mode="session_index"`` averages the
    query's 1-based position in its session instead of the hit rank.
    """
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    if ahr_mode not in ("suggestion_rank", "session_index"):
        raise ValueError(f"unknown ahr_mode {ahr_mode!r}")
    no_q = hits = 0
    ahr_values: list[int] = []
    histogram: Counter[int] = Counter()
    ndcg_values: list[float] = []
    for session in sessions:
        normalized = [normalize_query(entry.query) for entry in session.entries]
        for index, entry in enumerate(session.entries):
            after = frozenset(normalized[index + 1 :])
            if not after and not include_terminal:
                continue
            no_q += 1
            sugg = [normalize_query(s) for s in suggester(entry.query)][:cutoff]
            rank = hit(sugg, after)
            if rank is not None:
                hits += 1
                histogram[rank] += 1
                ahr_values.append(rank if ahr_mode == "suggestion_rank" else index + 1)
            ndcg_values.append(ndcg([relevance_fn(s, after) for s in sugg], gain=gain))
    recall = hits / no_q if no_q else 0.0
    ahr = sum(ahr_values) / len(ahr_values) if ahr_values else None
    return EvalReport(
        label=label,
        cutoff=cutoff,
        no_q=no_q,
        hits=hits,
        recall=recall,
        precision=recall / cutoff,
        ahr=ahr,
        nahr=ahr / cutoff if ahr is not None else None,
        ndcg=sum(ndcg_values) / len(ndcg_values) if ndcg_values else 0.0,
        hit_rank_histogram=dict(histogram),
    )


def hit_rank_histogram(report: EvalReport) -> list[tuple[int, int, float]]:
    """Rows of (rank, count, cumulative percentage) sorted by rank."""
    total = sum(report.hit_rank_histogram.values())
    rows = []
    running = 0
    for rank in sorted(report.hit_rank_histogram):
        count = report.hit_rank_histogram[rank]
        running += count
        rows.append((rank, count, running / total * 100.0))
    return rows


def _entry_from_fields(timestamp: object, query: object, user: object) -> QueryLogEntry:
    try:
        ts = float(timestamp)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise LogFormatError(f"timestamp {timestamp!r} is not a number") from None
    if not math.isfinite(ts):
        raise LogFormatError(f"timestamp {timestamp!r} is not finite")
    text = str(query)
    if not normalize_query(text):
        raise LogFormatError(f"query {text!r} is empty after normalization")
    return QueryLogEntry(timestamp=ts, query=text, user=str(user))


def read_query_log(path: str) -> list[QueryLogEntry]:
    """Query log entries from a JSON-lines or delimited text file.

    JSON-lines files hold one ``{"timestamp", "query", "user"}`` object per
    line; delimited files need a header row naming those three columns
    (comma- or tab-separated). Timestamps are epoch seconds.
    """
    with open(path, encoding="utf-8") as handle:
        content = handle.read()
    lines = [line for line in content.splitlines() if line.strip()]
    if not lines:
        return []
    if lines[0].lstrip().startswith("{"):
        entries = []
        for number, line in enumerate(lines, start=1):
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"line {number}: invalid JSON: {exc}") from None
            if not isinstance(record, dict) or not {"timestamp", "query", "user"} <= record.keys():
                raise LogFormatError(f"line {number}: expected timestamp/query/user fields")
            entries.append(_entry_from_fields(record["timestamp"], record["query"], record["user"]))
        return entries
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.DictReader(lines, delimiter=delimiter)
    fields = set(reader.fieldnames or ())
    if not {"timestamp", "query", "user"} <= fields:
        raise LogFormatError("header must name timestamp, query and user columns")
    return [
        _entry_from_fields(row["timestamp"], row["query"], row["user"])
        for row in reader
    ]


def _fmt(value: float | None, places: int) -> str:
    return "-" if value is None else f"{value:.{places}f}"


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned-column text table: one row per suggestion source."""
    header = ("ENGINE", "RECALL", "PRECISION", "AHR", "NAHR", "NDCG")
    rows = [
        (
            report.label,
            _fmt(report.recall, 3),
            _fmt(report.precision, 4),
            _fmt(report.ahr, 2),
            _fmt(report.nahr, 3),
            _fmt(report.ndcg, 3),
        )
        for report in reports
    ]
    widths = [
        max(len(header[col]), *(len(row[col]) for row in rows)) if rows else len(header[col])
        for col in range(len(header))
    ]
    lines = []
    for row in [header, *rows]:
        first = row[0].ljust(widths[0])
        rest = "  ".join(cell.rjust(widths[col]) for col, cell in enumerate(row) if col > 0)
        lines.append(f"{first}  {rest}".rstrip())
    return "\n".join(lines)


def make_msa_suggester(registry: Sequence[EngineSpec], cfg: RerankConfig) -> Suggester:
    """Suggester running the full aggregate-and-rerank pipeline."""

    def suggest(text: str) -> list[str]:
        q = Query(text)
        if not q.normalized:
            return []
        outcomes = fetch_all(registry, q)
        result = run_msa(q, ok_suggestion_lists(outcomes), cfg)
        return [entry.name for entry in result.entries]

    return suggest


def make_engine_suggester(spec: EngineSpec) -> Suggester:
    """Suggester replaying a single engine's own suggestion list."""

    def suggest(text: str) -> list[str]:
        q = Query(text)
        if not q.normalized:
            return []
        outcome = fetch_one(spec, q)
        if outcome.suggestions is None:
            return []
        return list(outcome.suggestions.suggestions)

    return suggest
