import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from metasuggest import EngineSpec, RerankConfig, ServiceConfig, registry_from_fixture

FIVE_ENGINES = ("naver", "google", "daum", "bing", "yahoo")

# Hand-crafted suggestion lists for the query "korea": a few candidates are
# shared across engines at different positions, the rest are per-engine
# fillers, giving 40+ distinct candidates for cutoff tests.
KOREA_LISTS = {
    "naver": [
        "korea travel",
        "korean food",
        "korea weather",
        "korea naver 3",
        "korea naver 4",
        "korea naver 5",
        "korea naver 6",
        "korea naver 7",
        "korea naver 8",
        "korea naver 9",
    ],
    "google": [
        "korean food",
        "korea travel",
        "korea university",
        "korea google 3",
        "korea google 4",
        "korea google 5",
        "korea google 6",
        "korea google 7",
    ],
    "daum": [
        "korea weather",
        "korea daum 1",
        "korea travel",
        "korea daum 3",
        "korea daum 4",
        "korea daum 5",
        "korea daum 6",
        "korea daum 7",
        "korea daum 8",
        "korea daum 9",
        "korea daum 10",
        "korea daum 11",
        "korea daum 12",
        "korea daum 13",
        "korea daum 14",
        "korea daum 15",
        "korea daum 16",
        "korea daum 17",
        "korea daum 18",
        "korea daum 19",
    ],
    "bing": [
        "korea university",
        "korean food",
        "korea bing 2",
        "korea bing 3",
        "korea bing 4",
        "korea bing 5",
        "korea bing 6",
        "korea bing 7",
    ],
    "yahoo": [
        "korea yahoo 0",
        "korea weather",
        "korea yahoo 2",
        "korea yahoo 3",
        "korea yahoo 4",
        "korea yahoo 5",
        "korea yahoo 6",
        "korea yahoo 7",
    ],
}


def write_fixture(path, mapping):
    path.write_text(json.dumps(mapping, ensure_ascii=False, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def korea_fixture_path(tmp_path):
    return write_fixture(tmp_path / "korea_fixture.json", {"korea": KOREA_LISTS})


@pytest.fixture
def korea_registry(korea_fixture_path):
    return registry_from_fixture(korea_fixture_path)


@pytest.fixture
def korea_service_config(korea_registry):
    return ServiceConfig(
        registry=korea_registry,
        rerank=RerankConfig(cutoff=8, engine_priority=[s.name for s in korea_registry]),
    )


class StubHandler(BaseHTTPRequestHandler):
    """Suggestion endpoint stub; behavior keyed by the request path prefix."""

    def do_GET(self):
        if self.path.startswith("/slow"):
            time.sleep(5.0)
            self._reply(200, json.dumps(["q", []]))
        elif self.path.startswith("/broken"):
            self._reply(500, "server error")
        elif self.path.startswith("/garbage"):
            self._reply(200, "this is not json{{")
        elif self.path.startswith("/mixed"):
            self._reply(200, json.dumps(["q", ["good one", 7, "good two", None]]))
        else:
            query = self.path.split("q=", 1)[-1]
            self._reply(200, json.dumps([query, [f"{query} a", f"{query} b", f"{query} c"]]))

    def _reply(self, status, body):
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="session")
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    server.daemon_threads = True
    server.block_on_close = False
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def http_spec(base, path, name="stub", priority=0, timeout_ms=2000, **kwargs):
    return EngineSpec(
        name=name,
        priority=priority,
        endpoint_template=f"{base}{path}?q={{query}}",
        timeout_ms=timeout_ms,
        **kwargs,
    )


def write_planted_dataset(tmp_path, sessions=10, chain_length=3):
    """Log + fixture where every non-final query's next query is planted as
    the top suggestion of every engine, so the meta top-1 always hits."""
    fixture = {}
    log_lines = []
    for user_index in range(sessions):
        chain = [f"seed {user_index}"] + [
            f"planted {user_index} step {step}" for step in range(1, chain_length)
        ]
        for position, query_text in enumerate(chain):
            log_lines.append(
                {
                    "timestamp": user_index * 100000 + position * 5,
                    "query": query_text,
                    "user": f"user{user_index}",
                }
            )
            if position + 1 < len(chain):
                planted = chain[position + 1]
                fixture[query_text] = {
                    engine: [planted]
                    + [f"decoy {engine} {user_index} {position} {extra}" for extra in range(3)]
                    for engine in FIVE_ENGINES
                }
    log_path = tmp_path / "planted_log.jsonl"
    log_path.write_text(
        "".join(json.dumps(line) + "\n" for line in log_lines), encoding="utf-8"
    )
    fixture_path = write_fixture(tmp_path / "planted_fixture.json", fixture)
    return log_path, fixture_path


def write_overlap_free_dataset(tmp_path):
    """Log + fixture whose suggestion vocabulary never matches a log query."""
    fixture = {}
    log_lines = []
    for user_index in range(5):
        for position in range(3):
            query_text = f"real {user_index} {position}"
            log_lines.append(
                {
                    "timestamp": user_index * 100000 + position * 5,
                    "query": query_text,
                    "user": f"user{user_index}",
                }
            )
            fixture[query_text] = {
                engine: [f"decoy {engine} {user_index} {position} {extra}" for extra in range(4)]
                for engine in FIVE_ENGINES
            }
    log_path = tmp_path / "overlap_free_log.jsonl"
    log_path.write_text(
        "".join(json.dumps(line) + "\n" for line in log_lines), encoding="utf-8"
    )
    fixture_path = write_fixture(tmp_path / "overlap_free_fixture.json", fixture)
    return log_path, fixture_path
