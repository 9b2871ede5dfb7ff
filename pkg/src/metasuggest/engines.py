"""Target-engine access: endpoint clients, parsing, fixtures, and fan-out.

Live engines are queried over HTTP with the OpenSearch-suggestions JSON
shape; recorded fixtures replay the same data from a file so everything
downstream can run hermetically. ``fetch_all`` fans out to all enabled
engines concurrently with per-engine deadlines and returns outcomes in
registry priority order regardless of completion order.
"""

from __future__ import annotations

import json
import logging
import random
import threading
import time
import urllib.parse
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import requests

from .core import EngineSuggestions, Query, normalize_query

__all__ = [
    "EngineSpec",
    "FetchOutcome",
    "ParseError",
    "ConfigError",
    "parse_opensearch",
    "fetch_one",
    "fetch_all",
    "record_fixture",
    "load_fixture",
    "load_registry",
    "default_registry",
    "registry_from_fixture",
]

log = logging.getLogger(__name__)

PARSER_KINDS = ("opensearch_json", "fixture")

STATUS_OK = "ok"
STATUS_TIMEOUT = "timeout"
STATUS_HTTP_ERROR = "http_error"
STATUS_PARSE_ERROR = "parse_error"


class ParseError(ValueError):
    """Engine response body is not a valid suggestion payload."""


class ConfigError(ValueError):
    """Engine registry or service configuration is invalid."""


@dataclass(frozen=True)
class EngineSpec:
    """One target engine: where to fetch suggestions and how to parse them.

    For ``parser="opensearch_json"`` the template must contain exactly one
    ``{query}`` placeholder; for ``parser="fixture"`` it is the path of the
    recorded fixture file instead. ``delay_ms``/``jitter_ms`` inject fixed
    and randomized latency into fixture engines for timing tests; draws
    that reach ``timeout_ms`` produce a timeout outcome.
    """

    name: str
    priority: int
    endpoint_template: str
    parser: str = "opensearch_json"
    native_cutoff: int = 8
    timeout_ms: int = 2000
    enabled: bool = True
    delay_ms: int = 0
    jitter_ms: int = 0

    def __post_init__(self) -> None:
        if self.parser not in PARSER_KINDS:
            raise ConfigError(f"engine {self.name!r}: unknown parser {self.parser!r}")
        if self.parser == "opensearch_json" and self.endpoint_template.count("{query}") != 1:
            raise ConfigError(
                f"engine {self.name!r}: endpoint template must contain exactly one "
                "{query} placeholder"
            )
        if self.priority < 0:
            raise ConfigError(f"engine {self.name!r}: priority must be >= 0")
        if self.native_cutoff < 1:
            raise ConfigError(f"engine {self.name!r}: native_cutoff must be >= 1")
        if self.timeout_ms <= 0:
            raise ConfigError(f"engine {self.name!r}: timeout_ms must be > 0")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "priority": self.priority,
            "endpoint_template": self.endpoint_template,
            "parser": self.parser,
            "native_cutoff": self.native_cutoff,
            "timeout_ms": self.timeout_ms,
            "enabled": self.enabled,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "EngineSpec":
        try:
            return cls(
                name=record["name"],
                priority=record["priority"],
                endpoint_template=record["endpoint_template"],
                parser=record.get("parser", "opensearch_json"),
                native_cutoff=record.get("native_cutoff", 8),
                timeout_ms=record.get("timeout_ms", 2000),
                enabled=record.get("enabled", True),
                delay_ms=record.get("delay_ms", 0),
                jitter_ms=record.get("jitter_ms", 0),
            )
        except KeyError as exc:
            raise ConfigError(f"engine record missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class FetchOutcome:
    """Result of one engine fetch; ``suggestions`` is present iff ok."""

    engine: str
    status: str
    suggestions: EngineSuggestions | None
    latency_ms: int

    def __post_init__(self) -> None:
        if (self.status == STATUS_OK) != (self.suggestions is not None):
            raise ValueError("suggestions must be present exactly when status is ok")


def parse_opensearch(body: bytes) -> list[str]:
    """Suggestion strings from an OpenSearch-suggestions JSON document.

    The accepted shape is a JSON array whose element 0 is the echoed query
    and element 1 the array of suggestion strings; list position is the
    0-based rank. Non-string entries are skipped with a warning.
    """
    try:
        document = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"body is not valid UTF-8 JSON: {exc}") from exc
    if (
        not isinstance(document, list)
        or len(document) < 2
        or not isinstance(document[0], str)
        or not isinstance(document[1], list)
    ):
        raise ParseError("expected [query, [suggestions, ...]] array shape")
    suggestions = []
    for entry in document[1]:
        if isinstance(entry, str):
            suggestions.append(entry)
        else:
            log.warning("skipping non-string suggestion entry %r", entry)
    return suggestions


_fixture_cache: dict[str, tuple[tuple[int, int], dict]] = {}
_fixture_cache_lock = threading.Lock()


def load_fixture(path: str | Path) -> dict[str, dict[str, list[str]]]:
    """Fixture mapping ``normalized query -> engine -> suggestion list``."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ParseError("fixture file must be a JSON object keyed by query")
    fixture: dict[str, dict[str, list[str]]] = {}
    for query_text, engines in raw.items():
        if not isinstance(engines, dict):
            raise ParseError(f"fixture entry for {query_text!r} must be an object")
        per_engine = {}
        for engine, suggestions in engines.items():
            if not isinstance(suggestions, list) or not all(
                isinstance(s, str) for s in suggestions
            ):
                raise ParseError(
                    f"fixture lists for {query_text!r}/{engine!r} must be string arrays"
                )
            per_engine[engine] = list(suggestions)
        fixture[normalize_query(query_text)] = per_engine
    return fixture


def _load_fixture_cached(path: str) -> dict[str, dict[str, list[str]]]:
    stat = Path(path).stat()
    key = (stat.st_mtime_ns, stat.st_size)
    with _fixture_cache_lock:
        cached = _fixture_cache.get(path)
        if cached is not None and cached[0] == key:
            return cached[1]
    fixture = load_fixture(path)
    with _fixture_cache_lock:
        _fixture_cache[path] = (key, fixture)
    return fixture


def _fetch_fixture(spec: EngineSpec, q: Query) -> list[str] | None:
    """Fixture lookup with injected latency; None signals a timeout."""
    delay_ms = spec.delay_ms + (random.uniform(0, spec.jitter_ms) if spec.jitter_ms else 0)
    if delay_ms >= spec.timeout_ms:
        time.sleep(spec.timeout_ms / 1000.0)
        return None
    if delay_ms:
        time.sleep(delay_ms / 1000.0)
    fixture = _load_fixture_cached(spec.endpoint_template)
    return list(fixture.get(q.normalized, {}).get(spec.name, []))


def _fetch_http(spec: EngineSpec, q: Query) -> list[str]:
    encoded = urllib.parse.quote(q.normalized, safe="")
    url = spec.endpoint_template.replace("{query}", encoded)
    response = requests.get(url, timeout=spec.timeout_ms / 1000.0)
    response.raise_for_status()
    return parse_opensearch(response.content)


def fetch_one(spec: EngineSpec, q: Query) -> FetchOutcome:
    """Fetch one engine's suggestions, never blocking past its timeout."""
    start = time.monotonic()

    def outcome(status: str, texts: list[str] | None = None) -> FetchOutcome:
        latency_ms = int((time.monotonic() - start) * 1000)
        suggestions = None
        if status == STATUS_OK:
            suggestions = EngineSuggestions(spec.name, texts[: spec.native_cutoff])
        return FetchOutcome(spec.name, status, suggestions, latency_ms)

    try:
        if spec.parser == "fixture":
            texts = _fetch_fixture(spec, q)
            if texts is None:
                return outcome(STATUS_TIMEOUT)
            return outcome(STATUS_OK, texts)
        return outcome(STATUS_OK, _fetch_http(spec, q))
    except requests.Timeout:
        return outcome(STATUS_TIMEOUT)
    except ParseError as exc:
        log.warning("engine %s: parse failure: %s", spec.name, exc)
        return outcome(STATUS_PARSE_ERROR)
    except (requests.RequestException, OSError) as exc:
        log.warning("engine %s: fetch failure: %s", spec.name, exc)
        return outcome(STATUS_HTTP_ERROR)


def fetch_all(registry: Sequence[EngineSpec], q: Query) -> list[FetchOutcome]:
    """Fetch all enabled engines concurrently.

    Total wall time is bounded by the slowest single engine, not the sum.
    Outcomes come back ordered by engine priority regardless of completion
    order; failed engines simply contribute no suggestions downstream.
    """
    enabled = [spec for spec in registry if spec.enabled]
    if not enabled:
        raise ConfigError("no enabled engines to query")
    with ThreadPoolExecutor(max_workers=len(enabled)) as pool:
        futures = [pool.submit(fetch_one, spec, q) for spec in enabled]
        outcomes = [future.result() for future in futures]
    by_priority = sorted(zip(enabled, outcomes), key=lambda pair: (pair[0].priority, pair[0].name))
    return [outcome for _, outcome in by_priority]


def ok_suggestion_lists(outcomes: Iterable[FetchOutcome]) -> list[EngineSuggestions]:
    """The successfully fetched suggestion lists, in outcome order."""
    return [o.suggestions for o in outcomes if o.suggestions is not None]


def record_fixture(
    registry: Sequence[EngineSpec],
    queries: Iterable[str],
    out_path: str | Path,
) -> dict[str, dict[str, list[str]]]:
    """Record live engine responses into a replayable fixture file.

    Engines that fail for a query are simply absent from that query's
    entry, preserving partiality. An empty query list yields a valid empty
    fixture.
    """
    fixture: dict[str, dict[str, list[str]]] = {}
    for text in queries:
        q = Query(text)
        if not q.normalized:
            continue
        outcomes = fetch_all(registry, q)
        fixture[q.normalized] = {
            o.engine: list(o.suggestions.suggestions)
            for o in outcomes
            if o.suggestions is not None
        }
    Path(out_path).write_text(
        json.dumps(fixture, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return fixture


def _registry_from_records(records: list) -> list[EngineSpec]:
    if not isinstance(records, list):
        raise ConfigError("engine registry must be a JSON array of engine records")
    specs = [EngineSpec.from_dict(record) for record in records]
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        raise ConfigError("engine names must be unique within a registry")
    return sorted(specs, key=lambda spec: (spec.priority, spec.name))


def load_registry(path: str | Path) -> list[EngineSpec]:
    """Engine registry from a JSON config file, sorted by priority."""
    return _registry_from_records(json.loads(Path(path).read_text(encoding="utf-8")))


def default_registry() -> list[EngineSpec]:
    """The five shipped default engines."""
    data = resources.files("metasuggest.data").joinpath("engines.json").read_text("utf-8")
    return _registry_from_records(json.loads(data))


def registry_from_fixture(
    path: str | Path,
    names: Sequence[str] | None = None,
) -> list[EngineSpec]:
    """Fixture-replay registry for every engine present in a fixture file.

    Engines that match shipped defaults keep the default relative order;
    unknown names follow in sorted order. The native cutoff is derived from
    the longest recorded list so replay is lossless.
    """
    fixture = load_fixture(path)
    observed: dict[str, int] = {}
    for per_engine in fixture.values():
        for engine, suggestions in per_engine.items():
            observed[engine] = max(observed.get(engine, 0), len(suggestions))
    default_order = {spec.name: spec.priority for spec in default_registry()}
    ordered = sorted(
        observed,
        key=lambda name: (0, default_order[name], name)
        if name in default_order
        else (1, 0, name),
    )
    if names is not None:
        unknown = [name for name in names if name not in observed]
        if unknown:
            raise ConfigError(f"engines not present in fixture: {', '.join(unknown)}")
        ordered = [name for name in ordered if name in set(names)]
    return [
        EngineSpec(
            name=name,
            priority=position,
            endpoint_template=str(path),
            parser="fixture",
            native_cutoff=max(observed[name], 1),
        )
        for position, name in enumerate(ordered)
    ]


def toggle_engine(registry: list[EngineSpec], name: str) -> EngineSpec:
    """Flip one engine's enabled flag in place; returns the new spec."""
    for position, spec in enumerate(registry):
        if spec.name == name:
            registry[position] = replace(spec, enabled=not spec.enabled)
            return registry[position]
    raise KeyError(name)
