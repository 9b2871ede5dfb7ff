"""Meta-suggestion engine: aggregate, rerank and serve query suggestions
fetched from multiple target search engines, plus an offline evaluation
harness for session-based suggestion quality."""

from .core import (
    CandidateSuggestion,
    EngineSuggestions,
    Query,
    RerankConfig,
    SuggestionResult,
    aggregate,
    compare,
    duplication,
    highlight_overlap,
    min_rank,
    normalize_query,
    run_msa,
    similarity,
)
from .engines import (
    ConfigError,
    EngineSpec,
    FetchOutcome,
    ParseError,
    default_registry,
    fetch_all,
    fetch_one,
    load_fixture,
    load_registry,
    parse_opensearch,
    record_fixture,
    registry_from_fixture,
)
from .evaluation import (
    EvalReport,
    LogFormatError,
    QueryLogEntry,
    QuerySession,
    compute_metrics,
    hit,
    hit_rank_histogram,
    ndcg,
    read_query_log,
    relevance_default,
    sessionize,
)
from .service import ServiceConfig, create_app, load_service_config

__version__ = "0.1.0"

__all__ = [
    "CandidateSuggestion",
    "ConfigError",
    "EngineSpec",
    "EngineSuggestions",
    "EvalReport",
    "FetchOutcome",
    "LogFormatError",
    "ParseError",
    "Query",
    "QueryLogEntry",
    "QuerySession",
    "RerankConfig",
    "ServiceConfig",
    "SuggestionResult",
    "aggregate",
    "compare",
    "compute_metrics",
    "create_app",
    "default_registry",
    "duplication",
    "fetch_all",
    "fetch_one",
    "highlight_overlap",
    "hit",
    "hit_rank_histogram",
    "load_fixture",
    "load_registry",
    "load_service_config",
    "min_rank",
    "ndcg",
    "normalize_query",
    "parse_opensearch",
    "read_query_log",
    "record_fixture",
    "registry_from_fixture",
    "relevance_default",
    "run_msa",
    "sessionize",
    "similarity",
]
