"""Operator entry point: one-shot suggestions, serving, recording, evaluation.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Default outputs
carry no timestamps, so identical inputs produce byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from collections.abc import Sequence
from pathlib import Path

from .core import Query, RerankConfig, run_msa
from .engines import (
    ConfigError,
    ParseError,
    default_registry,
    fetch_all,
    load_registry,
    ok_suggestion_lists,
    record_fixture,
    registry_from_fixture,
)
from .evaluation import (
    LogFormatError,
    compute_metrics,
    format_report_table,
    hit_rank_histogram,
    make_engine_suggester,
    make_msa_suggester,
    read_query_log,
    sessionize,
)
from .service import create_app, load_service_config, suggest_body

CONFIG_ENV_VAR = "METASUGGEST_CONFIG"


class UsageError(Exception):
    """Bad flag values; reported on stderr with exit code 2."""


def _registry_for(args: argparse.Namespace) -> list:
    if getattr(args, "fixtures", None):
        return registry_from_fixture(args.fixtures)
    if getattr(args, "config", None):
        return load_service_config(args.config).registry
    return default_registry()


def _select_engines(registry: list, names_csv: str | None) -> list:
    if not names_csv:
        return registry
    requested = [name.strip() for name in names_csv.split(",") if name.strip()]
    known = {spec.name for spec in registry}
    unknown = [name for name in requested if name not in known]
    if unknown:
        raise UsageError(f"unknown engines: {', '.join(unknown)}")
    selected = set(requested)
    return [spec for spec in registry if spec.name in selected]


def _format_suggest_table(body: dict) -> str:
    header = ("RANK", "SUGGESTION", "NOD", "BEST", "SIM", "ENGINES")
    rows = [
        (
            str(c["display_rank"]),
            c["display"],
            str(c["nod"]),
            str(c["rank"]),
            f"{c['similarity']:.2f}",
            ",".join(c["locs"]),
        )
        for c in body["candidates"]
    ]
    widths = [
        max(len(header[col]), *(len(row[col]) for row in rows)) if rows else len(header[col])
        for col in range(len(header))
    ]
    lines = []
    for row in [header, *rows]:
        cells = [
            row[col].rjust(widths[col]) if col in (0, 2, 3, 4) else row[col].ljust(widths[col])
            for col in range(len(header))
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)


def _cmd_suggest(args: argparse.Namespace) -> int:
    if args.cutoff < 1:
        raise UsageError("--cutoff must be >= 1")
    query = Query(args.query)
    if not query.normalized:
        raise UsageError("query is empty after normalization")
    registry = _select_engines(_registry_for(args), args.engines)
    start = time.monotonic()
    outcomes = fetch_all(registry, query)
    elapsed_ms = int((time.monotonic() - start) * 1000)
    if all(outcome.suggestions is None for outcome in outcomes):
        print("error: every engine fetch failed", file=sys.stderr)
        return 1
    cfg = RerankConfig(cutoff=args.cutoff, engine_priority=[s.name for s in registry])
    result = run_msa(query, ok_suggestion_lists(outcomes), cfg)
    body = suggest_body(result, outcomes, elapsed_ms)
    if args.json:
        print(json.dumps(body, ensure_ascii=False, indent=2))
    else:
        print(_format_suggest_table(body))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    config = load_service_config(config_path) if config_path else None
    app = create_app(config)
    host = args.host or (config.host if config else "127.0.0.1")
    port = args.port if args.port is not None else (config.port if config else 8765)
    uvicorn.run(app, host=host, port=port)
    return 0


def _cmd_record(args: argparse.Namespace) -> int:
    if args.config:
        registry = load_service_config(args.config).registry
    elif args.engines_file:
        registry = load_registry(args.engines_file)
    else:
        registry = default_registry()
    queries = [
        line.strip()
        for line in Path(args.queries).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    fixture = record_fixture(registry, queries, args.out)
    print(f"recorded {len(fixture)} queries to {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if args.cutoff < 1:
        raise UsageError("--cutoff must be >= 1")
    if args.eps <= 0:
        raise UsageError("--eps must be > 0")
    entries = read_query_log(args.log)
    sessions = sessionize(entries, eps=args.eps)
    registry = registry_from_fixture(args.fixtures)
    names = [spec.name for spec in registry]
    if args.engine == "all":
        selection = ["msa", *names]
    else:
        if args.engine != "msa" and args.engine not in names:
            raise UsageError(f"unknown engine {args.engine!r} (fixture has: {', '.join(names)})")
        selection = [args.engine]
    reports = []
    for choice in selection:
        if choice == "msa":
            cfg = RerankConfig(cutoff=args.cutoff, engine_priority=names)
            suggester = make_msa_suggester(registry, cfg)
            label = f"msa@{args.cutoff}"
        else:
            spec = next(s for s in registry if s.name == choice)
            suggester = make_engine_suggester(spec)
            label = choice
        reports.append(
            compute_metrics(
                sessions,
                suggester,
                args.cutoff,
                gain=args.gain,
                ahr_mode=args.ahr_mode.replace("-", "_"),
                include_terminal=args.include_terminal,
                label=label,
            )
        )
    print(format_report_table(reports))
    if args.json_out:
        payload = {"reports": [report.to_dict() for report in reports]}
        Path(args.json_out).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    if args.histogram_out:
        with open(args.histogram_out, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["label", "rank", "count", "cumulative_pct"])
            for report in reports:
                for rank, count, cumulative in hit_rank_histogram(report):
                    writer.writerow([report.label, rank, count, f"{cumulative:.4f}"])
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metasuggest",
        description="Aggregate and rerank query suggestions from multiple search engines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    suggest = sub.add_parser("suggest", help="print ranked meta-suggestions for one query")
    suggest.add_argument("--query", required=True, help="initial query text")
    suggest.add_argument("--cutoff", type=int, default=8, help="max suggestions to return")
    suggest.add_argument("--engines", help="comma-separated engine subset")
    suggest.add_argument("--fixtures", help="fixture file to replay instead of live engines")
    suggest.add_argument("--config", help="service config file (registry source)")
    suggest.add_argument("--json", action="store_true", help="emit the service response shape")
    suggest.set_defaults(handler=_cmd_suggest)

    serve = sub.add_parser("serve", help="start the suggestion HTTP service")
    serve.add_argument("--config", help=f"service config file (or ${CONFIG_ENV_VAR})")
    serve.add_argument("--host", help="bind address override")
    serve.add_argument("--port", type=int, help="bind port override")
    serve.set_defaults(handler=_cmd_serve)

    record = sub.add_parser("record", help="record live engine responses into a fixture file")
    record.add_argument("--queries", required=True, help="text file, one query per line")
    record.add_argument("--out", required=True, help="fixture file to write")
    record.add_argument("--config", help="service config file (registry source)")
    record.add_argument("--engines-file", help="engine registry JSON file")
    record.set_defaults(handler=_cmd_record)

    evaluate = sub.add_parser("evaluate", help="score suggestion quality against a query log")
    evaluate.add_argument("--log", required=True, help="query log (JSON-lines or CSV/TSV)")
    evaluate.add_argument("--fixtures", required=True, help="fixture file with recorded suggestions")
    evaluate.add_argument("--cutoff", type=int, default=8)
    evaluate.add_argument("--eps", type=float, default=30.0, help="session gap threshold, seconds")
    evaluate.add_argument(
        "--engine",
        default="msa",
        help="suggestion source: 'msa', a fixture engine name, or 'all'",
    )
    evaluate.add_argument(
        "--gain", choices=("linear", "exponential"), default="linear", help="NDCG gain model"
    )
    evaluate.add_argument(
        "--ahr-mode",
        choices=("suggestion-rank", "session-index"),
        default="suggestion-rank",
        help="average the hit's suggestion rank, or the query's session position",
    )
    evaluate.add_argument(
        "--include-terminal",
        action="store_true",
        help="count session-final queries (which can never hit) in the denominator",
    )
    evaluate.add_argument("--json-out", help="also write the reports as JSON")
    evaluate.add_argument("--histogram-out", help="also write hit-rank histograms as CSV")
    evaluate.set_defaults(handler=_cmd_evaluate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ParseError, LogFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
