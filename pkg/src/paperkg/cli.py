"""Command-line interface.

Subcommands: build (construct and persist a graph), plan (planning view
of the stored graph), query (retrieve implementations for a task),
stats (corpus counts), validate (invariant check).

Exit codes: 0 success, 1 usage error, 2 pipeline failure, 3 validation
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import Config, default_config, load_config
from .corpus import Blacklist
from .errors import PaperKGError
from .fixtures import (
    build_fixture_environment,
    fixture_blacklist,
    fixture_config,
    fixture_target,
    load_stub_rules,
)
from .graph import KnowledgeGraph
from .llm.gateway import LLMGateway, LLMProfile
from .llm.provider import HashingEmbeddingProvider, StubChatProvider
from .model import CATEGORIES, IMPLEMENTATION, STRUCTURAL
from .pipeline import build_graph
from .query import (
    decompose_task,
    fetch_planning_context,
    rerank_and_guide,
    retrieve_implementations,
)
from .rag import CachedEmbeddingProvider
from .storage import GraphStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PIPELINE = 2
EXIT_INVALID = 3

FIXTURES_ENV_VAR = "PAPERKG_FIXTURES"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; this project reserves 2 for
    # pipeline failures, so usage errors are remapped.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="paperkg", description="Executable knowledge graphs from papers and their code")
    parser.add_argument("--version", action="version", version=f"paperkg {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a YAML configuration file")
    common.add_argument("--kg-path", help="graph directory (overrides the configured path)")
    common.add_argument("--fixtures", help="fixture directory for offline sources and chat")
    common.add_argument("--json", action="store_true", help="emit machine-readable JSON")

    p_build = sub.add_parser("build", parents=[common], help="construct and persist a knowledge graph")
    p_build.add_argument("--target", help="target paper source (directory or tarball)")
    p_build.add_argument("--blacklist", help="file of repository urls to exclude")
    p_build.add_argument(
        "--no-resume", action="store_true", help="rebuild papers even if already stored"
    )

    p_query = sub.add_parser("query", parents=[common], help="retrieve implementations for a task")
    p_query.add_argument("task", help="the coding task to retrieve for")
    p_query.add_argument("--top", type=int, help="cap on returned hits")
    p_query.add_argument("--no-rerank", action="store_true", help="skip the model rerank pass")
    p_query.add_argument("--decompose", action="store_true", help="also split the task into subtasks")
    p_query.add_argument("--show-code", action="store_true", help="print full scripts, not just ids")

    sub.add_parser("plan", parents=[common], help="print the planning view (no code bodies)")
    sub.add_parser("stats", parents=[common], help="summarize the stored graph")
    sub.add_parser("validate", parents=[common], help="check every graph invariant")
    return parser


def _resolve_fixtures(args) -> Path | None:
    raw = args.fixtures or os.environ.get(FIXTURES_ENV_VAR)
    return Path(raw) if raw else None


def _load_cli_config(args, fixtures: Path | None) -> Config:
    if args.config:
        cfg = load_config(args.config)
    elif fixtures is not None:
        cfg = fixture_config(fixtures)
    else:
        cfg = default_config()
    if args.kg_path:
        cfg.global_.kg_path = args.kg_path
    if fixtures is None and cfg.global_.fixtures_path:
        # config may point at fixtures even when the flag is absent
        args.fixtures = cfg.global_.fixtures_path
    return cfg


def _setup_logging(cfg: Config) -> None:
    logging.basicConfig(
        level=getattr(logging, cfg.global_.log_level),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _store(cfg: Config) -> GraphStore:
    return GraphStore(cfg.global_.kg_path)


def _load_graph(cfg: Config) -> KnowledgeGraph:
    store = _store(cfg)
    if not store.exists():
        raise PaperKGError(
            f"no graph at {store.root}; run 'paperkg build' first or pass --kg-path"
        )
    return store.load_graph()


def _offline_gateway(cfg: Config, fixtures: Path | None) -> LLMGateway:
    rules = load_stub_rules(fixtures / "stub_chat.yaml") if fixtures else []
    return LLMGateway(
        StubChatProvider(rules),
        profile=LLMProfile(
            model=cfg.global_.model,
            paper_model=cfg.global_.paper_model,
            code_model=cfg.global_.code_model,
        ),
        max_retries=cfg.global_.max_retries,
    )


def _cmd_build(args) -> int:
    fixtures = _resolve_fixtures(args)
    cfg = _load_cli_config(args, fixtures)
    if fixtures is None and args.fixtures:
        fixtures = Path(args.fixtures)
    _setup_logging(cfg)
    if fixtures is None:
        print(
            "build needs source and repository clients; provide --fixtures, "
            f"set {FIXTURES_ENV_VAR}, or set global.fixtures_path in the config",
            file=sys.stderr,
        )
        return EXIT_PIPELINE
    env = build_fixture_environment(fixtures, cfg)
    target = Path(args.target) if args.target else fixture_target(fixtures)
    blacklist = (
        Blacklist.from_file(args.blacklist) if args.blacklist else fixture_blacklist(fixtures)
    )
    graph, report = build_graph(
        cfg,
        env,
        target,
        blacklist=blacklist,
        store=_store(cfg),
        resume=not args.no_resume,
    )
    if args.json:
        print(json.dumps(dataclasses.asdict(report), indent=2, sort_keys=True))
        return EXIT_OK
    print(f"built graph at {cfg.global_.kg_path}")
    print(f"target: {report.target_id}")
    for paper in report.papers:
        note = " (resumed)" if paper.resumed else ""
        print(
            f"  {paper.paper_id}: {paper.techniques} techniques, "
            f"{paper.code_nodes} code nodes ({paper.executable} executable), "
            f"{paper.pruned} pruned{note}"
        )
    for line in report.dropped:
        print(f"  dropped: {line}")
    for line in report.fetch_errors:
        print(f"  fetch error: {line}")
    print(f"source tokens ingested: {report.source_tokens_total}")
    print(f"chat requests: {report.llm_requests}")
    return EXIT_OK


def _cmd_plan(args) -> int:
    fixtures = _resolve_fixtures(args)
    cfg = _load_cli_config(args, fixtures)
    _setup_logging(cfg)
    view = fetch_planning_context(_load_graph(cfg))
    if args.json:
        print(json.dumps(view.to_json(), indent=2, sort_keys=True))
    else:
        print(view.to_doc())
    return EXIT_OK


def _cmd_query(args) -> int:
    fixtures = _resolve_fixtures(args)
    cfg = _load_cli_config(args, fixtures)
    _setup_logging(cfg)
    if args.top is not None:
        if args.top <= 0:
            print("--top must be positive", file=sys.stderr)
            return EXIT_USAGE
        cfg.retrieve.max_hits = args.top
    graph = _load_graph(cfg)
    embedder = CachedEmbeddingProvider(HashingEmbeddingProvider(cfg.retrieve.embed_model))
    gateway = _offline_gateway(cfg, fixtures)

    subtasks: list[str] = []
    if args.decompose:
        overview = fetch_planning_context(graph).to_doc()
        subtasks = decompose_task(gateway, args.task, overview)

    hits = retrieve_implementations(graph, args.task, embedder, cfg.retrieve)
    guidance = ""
    if hits and not args.no_rerank:
        result = rerank_and_guide(gateway, args.task, hits)
        hits, guidance = result.hits, result.guidance

    if args.json:
        doc = {
            "task": args.task,
            "subtasks": subtasks,
            "guidance": guidance,
            "hits": [
                {
                    "paper_id": h.paper_id,
                    "technique_id": h.technique_id,
                    "technique_name": h.technique_name,
                    "definition": h.definition,
                    "code_id": h.code_id,
                    "similarity": round(h.similarity, 6),
                    "executable": h.code.executable,
                    "documentation": h.code.documentation,
                    "implementation": h.code.implementation,
                    "test_script": h.code.test_script,
                }
                for h in hits
            ],
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
        return EXIT_OK

    for i, subtask in enumerate(subtasks, 1):
        print(f"subtask {i}: {subtask}")
    if not hits:
        print("no implementations matched the task")
        return EXIT_OK
    if guidance:
        print(f"guidance: {guidance}")
    for rank, hit in enumerate(hits, 1):
        exec_note = {True: "executable", False: "not executable", None: "unchecked"}[hit.code.executable]
        print(f"{rank}. {hit.technique_name} (similarity {hit.similarity:.3f}, {exec_note})")
        print(f"   {hit.code_id}: {hit.code.documentation or hit.definition}")
        if args.show_code:
            print("   ---")
            for line in hit.code.test_script.splitlines():
                print(f"   {line}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    fixtures = _resolve_fixtures(args)
    cfg = _load_cli_config(args, fixtures)
    _setup_logging(cfg)
    graph = _load_graph(cfg)
    by_category = {c: 0 for c in CATEGORIES}
    for paper in graph.papers.values():
        for node in paper.techniques.values():
            by_category[node.category] += 1
    code_nodes = sum(len(p.code_registry) for p in graph.papers.values())
    executable = sum(
        1 for p in graph.papers.values() for c in p.code_registry.values() if c.executable
    )
    stats = {
        "papers": len(graph.papers),
        "techniques": sum(len(p.techniques) for p in graph.papers.values()),
        "techniques_by_category": by_category,
        "code_nodes": code_nodes,
        "executable_code_nodes": executable,
        "structural_edges": sum(1 for e in graph.edges if e.kind == STRUCTURAL),
        "implementation_edges": sum(1 for e in graph.edges if e.kind == IMPLEMENTATION),
        "source_tokens": graph.total_source_tokens(),
    }
    if args.json:
        print(json.dumps(stats, indent=2, sort_keys=True))
    else:
        print(f"papers: {stats['papers']}")
        print(f"techniques: {stats['techniques']}")
        for category in CATEGORIES:
            print(f"  {category}: {by_category[category]}")
        print(f"code nodes: {code_nodes} ({executable} executable)")
        print(f"structural edges: {stats['structural_edges']}")
        print(f"implementation edges: {stats['implementation_edges']}")
        print(f"source tokens: {stats['source_tokens']}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    fixtures = _resolve_fixtures(args)
    cfg = _load_cli_config(args, fixtures)
    _setup_logging(cfg)
    violations = _load_graph(cfg).validate()
    if args.json:
        print(
            json.dumps(
                {"valid": not violations, "violations": [dataclasses.asdict(v) for v in violations]},
                indent=2,
                sort_keys=True,
            )
        )
    else:
        for violation in violations:
            print(f"{violation.rule}: {violation.subject}: {violation.message}")
        print("graph is valid" if not violations else f"{len(violations)} violations found")
    return EXIT_OK if not violations else EXIT_INVALID


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE
    handlers = {
        "build": _cmd_build,
        "plan": _cmd_plan,
        "query": _cmd_query,
        "stats": _cmd_stats,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except PaperKGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
