import json

import pytest
from fastapi.testclient import TestClient

from metasuggest.cli import main
from metasuggest.service import create_app

from conftest import (
    FIVE_ENGINES,
    http_spec,
    write_fixture,
    write_overlap_free_dataset,
    write_planted_dataset,
)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSuggestCommand:
    def test_table_has_eight_rows(self, capsys, korea_fixture_path):
        code, out, _ = run_cli(
            capsys, "suggest", "--query", "korea", "--fixtures", str(korea_fixture_path)
        )
        assert code == 0
        lines = out.rstrip("\n").splitlines()
        assert lines[0].split() == ["RANK", "SUGGESTION", "NOD", "BEST", "SIM", "ENGINES"]
        assert len(lines) == 1 + 8

    def test_cutoff_one_gives_one_row(self, capsys, korea_fixture_path):
        code, out, _ = run_cli(
            capsys,
            "suggest", "--query", "korea", "--cutoff", "1",
            "--fixtures", str(korea_fixture_path),
        )
        assert code == 0
        assert len(out.rstrip("\n").splitlines()) == 1 + 1

    def test_unknown_engine_is_usage_error(self, capsys, korea_fixture_path):
        code, _, err = run_cli(
            capsys,
            "suggest", "--query", "korea", "--engines", "nosuch",
            "--fixtures", str(korea_fixture_path),
        )
        assert code == 2
        assert "nosuch" in err

    def test_blank_query_is_usage_error(self, capsys, korea_fixture_path):
        code, _, err = run_cli(
            capsys, "suggest", "--query", "   ", "--fixtures", str(korea_fixture_path)
        )
        assert code == 2
        assert "empty" in err

    def test_bad_cutoff_is_usage_error(self, capsys, korea_fixture_path):
        code, _, _ = run_cli(
            capsys,
            "suggest", "--query", "korea", "--cutoff", "0",
            "--fixtures", str(korea_fixture_path),
        )
        assert code == 2

    def test_unknown_flag_exits_two(self, capsys, korea_fixture_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["suggest", "--query", "korea", "--frobnicate"])
        assert excinfo.value.code == 2

    def test_total_fetch_failure_exits_one(self, capsys, tmp_path):
        fixture = write_fixture(tmp_path / "f.json", {"q": {"solo": ["a"]}})
        registry_doc = [
            {
                "name": "solo",
                "priority": 0,
                "endpoint_template": "/definitely/not/here.json",
                "parser": "fixture",
            }
        ]
        config = {"engines": registry_doc}
        config_path = tmp_path / "service.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        code, _, err = run_cli(
            capsys, "suggest", "--query", "korea", "--config", str(config_path)
        )
        assert code == 1
        assert "failed" in err

    def test_engine_subset(self, capsys, korea_fixture_path):
        code, out, _ = run_cli(
            capsys,
            "suggest", "--query", "korea", "--engines", "google",
            "--fixtures", str(korea_fixture_path), "--json",
        )
        assert code == 0
        body = json.loads(out)
        assert [e["engine"] for e in body["engines"]] == ["google"]
        assert all(c["nod"] == 1 for c in body["candidates"])

    def test_json_output_equals_service_body(self, capsys, korea_fixture_path, korea_service_config):
        code, out, _ = run_cli(
            capsys,
            "suggest", "--query", "korea", "--fixtures", str(korea_fixture_path), "--json",
        )
        assert code == 0
        cli_body = json.loads(out)
        client = TestClient(create_app(korea_service_config))
        service_body = client.get("/api/suggest", params={"q": "korea"}).json()
        cli_body.pop("elapsed_ms")
        service_body.pop("elapsed_ms")
        assert cli_body == service_body

    def test_default_output_is_byte_identical_across_runs(self, capsys, korea_fixture_path):
        outputs = set()
        for _ in range(3):
            _, out, _ = run_cli(
                capsys, "suggest", "--query", "korea", "--fixtures", str(korea_fixture_path)
            )
            outputs.add(out)
        assert len(outputs) == 1


class TestEvaluateCommand:
    def test_planted_log_scores_perfectly(self, capsys, tmp_path):
        log_path, fixture_path = write_planted_dataset(tmp_path)
        json_out = tmp_path / "report.json"
        code, out, _ = run_cli(
            capsys,
            "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path),
            "--json-out", str(json_out),
        )
        assert code == 0
        report = json.loads(json_out.read_text())["reports"][0]
        assert report["label"] == "msa@8"
        assert report["recall"] == 1.0
        assert report["ahr"] == 1.0
        assert report["nahr"] == 1.0 / 8
        assert "1.000" in out

    def test_overlap_free_log_scores_zero(self, capsys, tmp_path):
        log_path, fixture_path = write_overlap_free_dataset(tmp_path)
        json_out = tmp_path / "report.json"
        code, out, _ = run_cli(
            capsys,
            "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path),
            "--json-out", str(json_out),
        )
        assert code == 0
        report = json.loads(json_out.read_text())["reports"][0]
        assert report["recall"] == 0.0
        assert report["ahr"] is None
        table_row = out.splitlines()[1]
        assert "-" in table_row.split()

    def test_reports_are_byte_identical_across_runs(self, capsys, tmp_path):
        log_path, fixture_path = write_planted_dataset(tmp_path)
        outputs = []
        json_paths = [tmp_path / "r1.json", tmp_path / "r2.json"]
        hist_paths = [tmp_path / "h1.csv", tmp_path / "h2.csv"]
        for json_path, hist_path in zip(json_paths, hist_paths):
            _, out, _ = run_cli(
                capsys,
                "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path),
                "--engine", "all",
                "--json-out", str(json_path), "--histogram-out", str(hist_path),
            )
            outputs.append(out)
        assert outputs[0] == outputs[1]
        assert json_paths[0].read_bytes() == json_paths[1].read_bytes()
        assert hist_paths[0].read_bytes() == hist_paths[1].read_bytes()

    def test_engine_all_produces_table_2_layout(self, capsys, tmp_path):
        log_path, fixture_path = write_planted_dataset(tmp_path)
        code, out, _ = run_cli(
            capsys,
            "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path),
            "--engine", "all",
        )
        assert code == 0
        lines = out.rstrip("\n").splitlines()
        labels = [line.split()[0] for line in lines[1:]]
        assert labels == ["msa@8", *FIVE_ENGINES]

    def test_single_baseline_engine(self, capsys, tmp_path):
        log_path, fixture_path = write_planted_dataset(tmp_path)
        json_out = tmp_path / "report.json"
        code, _, _ = run_cli(
            capsys,
            "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path),
            "--engine", "google", "--json-out", str(json_out),
        )
        assert code == 0
        report = json.loads(json_out.read_text())["reports"][0]
        assert report["label"] == "google"
        assert report["recall"] == 1.0  # the planted suggestion tops every engine list

    def test_unknown_engine_is_usage_error(self, capsys, tmp_path):
        log_path, fixture_path = write_planted_dataset(tmp_path)
        code, _, err = run_cli(
            capsys,
            "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path),
            "--engine", "altavista",
        )
        assert code == 2
        assert "altavista" in err

    def test_unreadable_log_exits_one(self, capsys, tmp_path):
        _, fixture_path = write_planted_dataset(tmp_path)
        code, _, _ = run_cli(
            capsys,
            "evaluate", "--log", str(tmp_path / "missing.jsonl"),
            "--fixtures", str(fixture_path),
        )
        assert code == 1

    def test_invalid_log_exits_one(self, capsys, tmp_path):
        _, fixture_path = write_planted_dataset(tmp_path)
        bad_log = tmp_path / "bad.jsonl"
        bad_log.write_text('{"timestamp": "zap", "query": "x", "user": "u"}\n', encoding="utf-8")
        code, _, err = run_cli(
            capsys, "evaluate", "--log", str(bad_log), "--fixtures", str(fixture_path)
        )
        assert code == 1
        assert "timestamp" in err

    def test_histogram_csv_shape(self, capsys, tmp_path):
        log_path, fixture_path = write_planted_dataset(tmp_path)
        hist_path = tmp_path / "hist.csv"
        run_cli(
            capsys,
            "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path),
            "--histogram-out", str(hist_path),
        )
        lines = hist_path.read_text().strip().splitlines()
        assert lines[0] == "label,rank,count,cumulative_pct"
        assert lines[1].startswith("msa@8,1,20,")  # 10 sessions x 2 hits, all at rank 1

    def test_include_terminal_flag(self, capsys, tmp_path):
        log_path, fixture_path = write_planted_dataset(tmp_path, sessions=10, chain_length=3)
        json_out = tmp_path / "report.json"
        run_cli(
            capsys,
            "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path),
            "--include-terminal", "--json-out", str(json_out),
        )
        report = json.loads(json_out.read_text())["reports"][0]
        # 30 queries total, 10 of them terminal and unhittable
        assert report["no_q"] == 30
        assert report["recall"] == pytest.approx(20 / 30)


class TestServeCommand:
    def test_config_resolved_from_environment(self, capsys, tmp_path, monkeypatch, korea_fixture_path):
        config_doc = {
            "listen": "127.0.0.1:9123",
            "engines": [
                {
                    "name": "google",
                    "priority": 0,
                    "endpoint_template": str(korea_fixture_path),
                    "parser": "fixture",
                }
            ],
        }
        config_path = tmp_path / "service.json"
        config_path.write_text(json.dumps(config_doc), encoding="utf-8")
        monkeypatch.setenv("METASUGGEST_CONFIG", str(config_path))
        captured = {}

        def fake_run(app, host, port):
            captured["host"], captured["port"] = host, port
            client = TestClient(app)
            captured["engines"] = [
                e["name"] for e in client.get("/api/engines").json()["engines"]
            ]

        monkeypatch.setattr("uvicorn.run", fake_run)
        assert main(["serve"]) == 0
        assert captured == {"host": "127.0.0.1", "port": 9123, "engines": ["google"]}

    def test_flag_overrides_listen_address(self, capsys, tmp_path, monkeypatch):
        captured = {}
        monkeypatch.setattr(
            "uvicorn.run", lambda app, host, port: captured.update(host=host, port=port)
        )
        assert main(["serve", "--host", "0.0.0.0", "--port", "1234"]) == 0
        assert captured == {"host": "0.0.0.0", "port": 1234}


class TestRecordCommand:
    def registry_file(self, tmp_path, stub_server, paths=("suggest", "suggest")):
        records = [
            http_spec(stub_server, f"/{path}", name=f"eng{i}", priority=i).to_dict()
            for i, path in enumerate(paths)
        ]
        registry_path = tmp_path / "registry.json"
        registry_path.write_text(json.dumps(records), encoding="utf-8")
        return registry_path

    def test_record_then_suggest_roundtrip(self, capsys, tmp_path, stub_server):
        registry_path = self.registry_file(tmp_path, stub_server)
        queries_path = tmp_path / "queries.txt"
        queries_path.write_text("korea\nseoul\n", encoding="utf-8")
        out_path = tmp_path / "recorded.json"
        code, out, _ = run_cli(
            capsys,
            "record", "--queries", str(queries_path), "--out", str(out_path),
            "--engines-file", str(registry_path),
        )
        assert code == 0
        assert "recorded 2 queries" in out
        code, out, _ = run_cli(
            capsys, "suggest", "--query", "korea", "--fixtures", str(out_path), "--json"
        )
        assert code == 0
        body = json.loads(out)
        assert body["candidates"]
        assert body["candidates"][0]["nod"] == 2  # both stub engines return the same lists

    def test_engine_down_is_absent_from_fixture(self, capsys, tmp_path, stub_server):
        registry_path = self.registry_file(tmp_path, stub_server, paths=("suggest", "broken"))
        queries_path = tmp_path / "queries.txt"
        queries_path.write_text("korea\n", encoding="utf-8")
        out_path = tmp_path / "recorded.json"
        code, _, _ = run_cli(
            capsys,
            "record", "--queries", str(queries_path), "--out", str(out_path),
            "--engines-file", str(registry_path),
        )
        assert code == 0
        recorded = json.loads(out_path.read_text())
        assert set(recorded["korea"]) == {"eng0"}

    def test_empty_query_file_writes_valid_empty_fixture(self, capsys, tmp_path, stub_server):
        registry_path = self.registry_file(tmp_path, stub_server)
        queries_path = tmp_path / "queries.txt"
        queries_path.write_text("", encoding="utf-8")
        out_path = tmp_path / "recorded.json"
        code, _, _ = run_cli(
            capsys,
            "record", "--queries", str(queries_path), "--out", str(out_path),
            "--engines-file", str(registry_path),
        )
        assert code == 0
        assert json.loads(out_path.read_text()) == {}

    def test_missing_queries_file_exits_one(self, capsys, tmp_path, stub_server):
        registry_path = self.registry_file(tmp_path, stub_server)
        code, _, _ = run_cli(
            capsys,
            "record", "--queries", str(tmp_path / "nope.txt"),
            "--out", str(tmp_path / "out.json"),
            "--engines-file", str(registry_path),
        )
        assert code == 1


class TestRecordEvaluateRoundTrip:
    def test_end_to_end_smoke(self, capsys, tmp_path, stub_server):
        """Record from (stub) live engines, then evaluate against the fixture."""
        records = [
            http_spec(stub_server, "/suggest", name=name, priority=i).to_dict()
            for i, name in enumerate(("alpha", "beta"))
        ]
        registry_path = tmp_path / "registry.json"
        registry_path.write_text(json.dumps(records), encoding="utf-8")
        queries_path = tmp_path / "queries.txt"
        queries_path.write_text("korea\nkorea a\n", encoding="utf-8")
        fixture_path = tmp_path / "recorded.json"
        code, _, _ = run_cli(
            capsys,
            "record", "--queries", str(queries_path), "--out", str(fixture_path),
            "--engines-file", str(registry_path),
        )
        assert code == 0
        log_path = tmp_path / "log.jsonl"
        log_path.write_text(
            json.dumps({"timestamp": 0, "query": "korea", "user": "u"}) + "\n"
            + json.dumps({"timestamp": 5, "query": "korea a", "user": "u"}) + "\n",
            encoding="utf-8",
        )
        code, out, _ = run_cli(
            capsys, "evaluate", "--log", str(log_path), "--fixtures", str(fixture_path)
        )
        assert code == 0
        assert out.splitlines()[0].startswith("ENGINE")
