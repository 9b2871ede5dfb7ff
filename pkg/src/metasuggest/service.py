"""HTTP facade for interactive clients: suggest, highlight, engine toggles.

The web UI (or any host page) talks JSON to this service; the service fans
out to the configured engines, reranks, and answers. Engine enable/disable
state is in-memory per process and takes effect on the next request.
"""

from __future__ import annotations

import json
import threading
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .core import Query, RerankConfig, SuggestionResult, highlight_overlap, run_msa
from .engines import (
    ConfigError,
    EngineSpec,
    FetchOutcome,
    default_registry,
    fetch_all,
    load_registry,
    ok_suggestion_lists,
    toggle_engine,
)

__all__ = ["ServiceConfig", "load_service_config", "create_app", "suggest_body"]


@dataclass
class ServiceConfig:
    """Service wiring: listen address, engine registry, rerank defaults, flags."""

    registry: list[EngineSpec] = field(default_factory=default_registry)
    rerank: RerankConfig | None = None
    host: str = "127.0.0.1"
    port: int = 8765
    suggestions_enabled: bool = True
    highlight_enabled: bool = True

    def __post_init__(self) -> None:
        if self.rerank is None:
            self.rerank = RerankConfig(
                cutoff=8, engine_priority=[spec.name for spec in self.registry]
            )
        names = {spec.name for spec in self.registry}
        stray = [name for name in self.rerank.engine_priority if name not in names]
        if stray:
            raise ConfigError(
                f"rerank priority names not in registry: {', '.join(stray)}"
            )


def load_service_config(path: str | Path) -> ServiceConfig:
    """Service configuration from a JSON file.

    Schema: ``{"listen": "host:port", "engines": [...], "rerank":
    {"cutoff", "engine_priority"}, "features": {...}}``; every section is
    optional and falls back to defaults.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("service config must be a JSON object")
    kwargs: dict = {}
    if "listen" in raw:
        host, _, port = str(raw["listen"]).rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"bad listen address {raw['listen']!r}, expected host:port")
        kwargs["host"], kwargs["port"] = host, int(port)
    if "engines" in raw:
        kwargs["registry"] = [EngineSpec.from_dict(record) for record in raw["engines"]]
    elif "engines_file" in raw:
        kwargs["registry"] = load_registry(raw["engines_file"])
    if "rerank" in raw:
        section = raw["rerank"]
        registry = kwargs.get("registry", default_registry())
        kwargs["rerank"] = RerankConfig(
            cutoff=section.get("cutoff", 8),
            engine_priority=section.get(
                "engine_priority", [spec.name for spec in registry]
            ),
        )
    features = raw.get("features", {})
    if "suggestions_enabled" in features:
        kwargs["suggestions_enabled"] = bool(features["suggestions_enabled"])
    if "highlight_enabled" in features:
        kwargs["highlight_enabled"] = bool(features["highlight_enabled"])
    return ServiceConfig(**kwargs)


def suggest_body(
    result: SuggestionResult, outcomes: Sequence[FetchOutcome], elapsed_ms: int
) -> dict:
    """The response document shared by the service and the CLI's JSON mode.

    Per-engine latency stays out of the body on purpose: everything except
    ``elapsed_ms`` is a deterministic function of query, enabled set and
    engine content.
    """
    return {
        **result.to_dict(),
        "engines": [{"engine": o.engine, "status": o.status} for o in outcomes],
        "elapsed_ms": elapsed_ms,
    }


class _Registry:
    """Engine registry with thread-safe runtime toggling."""

    def __init__(self, specs: Sequence[EngineSpec]):
        self._specs = list(specs)
        self._lock = threading.Lock()

    def snapshot(self) -> list[EngineSpec]:
        with self._lock:
            return list(self._specs)

    def toggle(self, name: str) -> EngineSpec:
        with self._lock:
            return toggle_engine(self._specs, name)


class HighlightRequest(BaseModel):
    q: str
    host_suggestions: list[str]


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    """Build the service application around one engine registry."""
    config = config or ServiceConfig()
    registry = _Registry(config.registry)
    rerank = config.rerank
    assert rerank is not None

    app = FastAPI(title="metasuggest")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def run_pipeline(
        q_text: str, cutoff: int, engine_names: list[str] | None
    ) -> tuple[SuggestionResult, list[FetchOutcome], int]:
        query = Query(q_text)
        if not query.normalized:
            raise HTTPException(status_code=400, detail="empty query")
        if cutoff < 1:
            raise HTTPException(status_code=400, detail="cutoff must be >= 1")
        specs = registry.snapshot()
        if engine_names is not None:
            known = {spec.name for spec in specs}
            unknown = [name for name in engine_names if name not in known]
            if unknown:
                raise HTTPException(
                    status_code=400, detail=f"unknown engines: {', '.join(unknown)}"
                )
            specs = [spec for spec in specs if spec.name in set(engine_names)]
        try:
            start = time.monotonic()
            outcomes = fetch_all(specs, query)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        cfg = RerankConfig(cutoff=cutoff, engine_priority=rerank.engine_priority)
        result = run_msa(query, ok_suggestion_lists(outcomes), cfg)
        elapsed_ms = int((time.monotonic() - start) * 1000)
        return result, outcomes, elapsed_ms

    @app.get("/api/suggest")
    def suggest(q: str, cutoff: int | None = None, engines: str | None = None):
        if not config.suggestions_enabled:
            raise HTTPException(status_code=503, detail="suggestions are disabled")
        engine_names = engines.split(",") if engines else None
        result, outcomes, elapsed_ms = run_pipeline(
            q, cutoff if cutoff is not None else rerank.cutoff, engine_names
        )
        return suggest_body(result, outcomes, elapsed_ms)

    @app.post("/api/highlight")
    def highlight(body: HighlightRequest):
        if not config.highlight_enabled:
            raise HTTPException(status_code=503, detail="highlighting is disabled")
        result, _, _ = run_pipeline(body.q, rerank.cutoff, None)
        flags = highlight_overlap(
            [entry.name for entry in result.entries], body.host_suggestions
        )
        return {
            "query": result.query.normalized,
            "suggestions": [
                {"name": entry.name, "display": entry.display, "overlap": overlap}
                for entry, (_, overlap) in zip(result.entries, flags)
            ],
        }

    @app.get("/api/engines")
    def list_engines():
        return {"engines": [spec.to_dict() for spec in registry.snapshot()]}

    @app.post("/api/engines/{name}/toggle")
    def toggle(name: str):
        try:
            spec = registry.toggle(name)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown engine {name!r}") from None
        return {"engine": spec.name, "enabled": spec.enabled}

    return app
