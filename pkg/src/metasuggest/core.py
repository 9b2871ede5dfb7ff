"""Pure reranking logic for meta-suggestions.

Everything in this module is a pure function over immutable values: text
normalization, the character-overlap similarity score, duplicate counting
across engines, minimum-rank extraction, the three-priority comparator and
the full aggregate-sort-truncate pipeline. No I/O happens here; fetching
lives in :mod:`metasuggest.engines`.
"""

from __future__ import annotations

import functools
import unicodedata
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

__all__ = [
    "Query",
    "EngineSuggestions",
    "CandidateSuggestion",
    "RerankConfig",
    "SuggestionResult",
    "normalize_query",
    "similarity",
    "duplication",
    "min_rank",
    "compare",
    "aggregate",
    "run_msa",
    "highlight_overlap",
]

# casefold() can emit decomposed sequences that NFC then recombines, so a
# single pass is not a fixed point for every input; iterate until stable.
_MAX_NORMALIZE_PASSES = 8


def normalize_query(raw: str) -> str:
    """Canonical text form used for all cross-engine equality checks.

    NFC-composes, case-folds, strips, and collapses whitespace runs to
    single spaces. Idempotent: the output is a fixed point of the
    transformation.
    """
    text = raw
    for _ in range(_MAX_NORMALIZE_PASSES):
        folded = unicodedata.normalize("NFC", text).casefold()
        collapsed = " ".join(folded.split())
        if collapsed == text:
            return collapsed
        text = collapsed
    return text


@dataclass(frozen=True)
class Query:
    """An initial query as typed by the user, plus its normalized form."""

    raw: str
    normalized: str = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "normalized", normalize_query(self.raw))


@dataclass(frozen=True)
class EngineSuggestions:
    """One engine's ordered suggestion list; list index is the 0-based rank."""

    engine: str
    suggestions: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "suggestions", tuple(self.suggestions))


@dataclass(frozen=True)
class CandidateSuggestion:
    """An aggregated candidate query and its reranking attributes.

    ``locs`` maps each engine that listed the candidate to the candidate's
    0-based rank within that engine; ``rank`` is the minimum of those,
    ``nod`` the number of engines, ``similarity`` the percentage overlap
    with the initial query.
    """

    name: str
    display: str
    locs: Mapping[str, int]
    rank: int
    nod: int
    similarity: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "display": self.display,
            "locs": dict(self.locs),
            "rank": self.rank,
            "nod": self.nod,
            "similarity": self.similarity,
        }


@dataclass(frozen=True)
class RerankConfig:
    """Cutoff and engine tie-break order for the reranking pipeline."""

    cutoff: int = 8
    engine_priority: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        priority = tuple(self.engine_priority)
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")
        if len(set(priority)) != len(priority):
            raise ValueError("engine_priority contains duplicate engine names")
        object.__setattr__(self, "engine_priority", priority)


@dataclass(frozen=True)
class SuggestionResult:
    """Final ranked suggestions for one initial query."""

    query: Query
    cutoff: int
    entries: tuple[CandidateSuggestion, ...]

    def to_dict(self) -> dict:
        return {
            "query": self.query.normalized,
            "cutoff": self.cutoff,
            "candidates": [
                {**entry.to_dict(), "display_rank": position}
                for position, entry in enumerate(self.entries, start=1)
            ],
        }


def similarity(query: str, candidate: str) -> float:
    """Character-overlap score in [0, 100] between two normalized texts.

    Counts identical characters as the multiset intersection (per-character
    minimum of occurrence counts, spaces included) and divides by the longer
    length. Both-empty input is defined as 0.
    """
    longest = max(len(query), len(candidate))
    if longest == 0:
        return 0.0
    common = sum((Counter(query) & Counter(candidate)).values())
    return common / longest * 100.0


def duplication(candidate: str, per_engine: Sequence[EngineSuggestions]) -> int:
    """Number of engines whose suggestion list contains ``candidate``."""
    return sum(1 for eng in per_engine if candidate in eng.suggestions)


def min_rank(candidate: str, per_engine: Sequence[EngineSuggestions]) -> int:
    """Best (lowest) 0-based rank of ``candidate`` across engine lists."""
    ranks = [
        eng.suggestions.index(candidate)
        for eng in per_engine
        if candidate in eng.suggestions
    ]
    if not ranks:
        raise ValueError("not a candidate")
    return min(ranks)


def _priority_index(candidate: CandidateSuggestion, cfg: RerankConfig) -> int:
    """Tie-break index: best engine-priority position among the engines
    supplying the candidate's minimum rank."""
    order = {name: pos for pos, name in enumerate(cfg.engine_priority)}
    fallback = len(cfg.engine_priority)
    return min(
        order.get(engine, fallback)
        for engine, rank in candidate.locs.items()
        if rank == candidate.rank
    )


def compare(a: CandidateSuggestion, b: CandidateSuggestion, cfg: RerankConfig) -> int:
    """Three-priority lexicographic comparator; negative means ``a`` first.

    Factors are applied in sequence: higher duplicate count first, then
    lower best rank, then higher similarity. Remaining ties fall back to
    the engine-priority index of the engine supplying the minimum rank,
    then to codepoint order of the normalized name, so the order is total.
    """
    if a.nod != b.nod:
        return -1 if a.nod > b.nod else 1
    if a.rank != b.rank:
        return -1 if a.rank < b.rank else 1
    if a.similarity != b.similarity:
        return -1 if a.similarity > b.similarity else 1
    tie_a, tie_b = _priority_index(a, cfg), _priority_index(b, cfg)
    if tie_a != tie_b:
        return -1 if tie_a < tie_b else 1
    if a.name != b.name:
        return -1 if a.name < b.name else 1
    return 0


def _canonical_order(
    per_engine: Sequence[EngineSuggestions], engine_priority: Sequence[str]
) -> list[EngineSuggestions]:
    """Engine lists reordered by priority so merging ignores input order."""
    order = {name: pos for pos, name in enumerate(engine_priority)}
    fallback = len(engine_priority)
    return sorted(per_engine, key=lambda eng: (order.get(eng.engine, fallback), eng.engine))


def aggregate(
    q: Query,
    per_engine: Sequence[EngineSuggestions],
    engine_priority: Sequence[str] = (),
    similarity_fn: Callable[[str, str], float] = similarity,
) -> list[CandidateSuggestion]:
    """Merge engine suggestion lists into deduplicated candidates.

    Candidates are keyed by normalized text; the display form is the first
    occurrence from the highest-priority engine. The output is independent
    of the input engine order (lists are canonicalized by ``engine_priority``
    before merging). Whitespace-only suggestions are dropped.
    """
    merged: dict[str, dict] = {}
    for eng in _canonical_order(per_engine, engine_priority):
        for position, text in enumerate(eng.suggestions):
            name = normalize_query(text)
            if not name:
                continue
            entry = merged.setdefault(name, {"display": text, "locs": {}})
            if eng.engine not in entry["locs"]:
                entry["locs"][eng.engine] = position
    return [
        CandidateSuggestion(
            name=name,
            display=entry["display"],
            locs=entry["locs"],
            rank=min(entry["locs"].values()),
            nod=len(entry["locs"]),
            similarity=similarity_fn(q.normalized, name),
        )
        for name, entry in merged.items()
    ]


def run_msa(
    q: Query,
    per_engine: Sequence[EngineSuggestions],
    cfg: RerankConfig,
    similarity_fn: Callable[[str, str], float] = similarity,
) -> SuggestionResult:
    """Aggregate, sort by the three-priority comparator, truncate to cutoff."""
    candidates = aggregate(q, per_engine, cfg.engine_priority, similarity_fn)
    candidates.sort(key=functools.cmp_to_key(lambda a, b: compare(a, b, cfg)))
    return SuggestionResult(query=q, cutoff=cfg.cutoff, entries=tuple(candidates[: cfg.cutoff]))


def highlight_overlap(
    meta: Sequence[str], host: Sequence[str]
) -> list[tuple[str, bool]]:
    """Flag each meta-suggestion that also appears in the host page's list.

    Membership is tested on normalized forms, so casing and whitespace
    differences between the two sources do not break the match.
    """
    host_set = {normalize_query(entry) for entry in host}
    return [(entry, normalize_query(entry) in host_set) for entry in meta]
