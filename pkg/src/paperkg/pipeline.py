"""End-to-end build: target paper in, persisted knowledge graph out.

Stages: ingest the target, extract its technique forest, curate related
papers (bibliography + technique search), then per curated paper
extract, enrich, synthesize code, prune, and persist. Every paper is
written to the store as soon as it is finished, so an interrupted build
resumes by skipping papers already in the manifest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .codegen import (
    locate_snippets,
    sandbox_limits_from_config,
    self_debug,
    split_script,
    synthesize_composite,
    synthesize_leaf,
    verify_code,
)
from .config import Config
from .corpus import (
    ArxivClient,
    Blacklist,
    CandidatePaper,
    RepoClient,
    ResolvedPaper,
    SearchClient,
    extract_references,
    filter_official,
    rank_references,
    resolve_sources,
    retrieve_by_technique,
    write_corpus_manifest,
)
from .errors import PaperKGError, PipelineError
from .extraction import enrich_definition, extract_techniques
from .graph import KnowledgeGraph
from .latex import (
    LatexBundle,
    expand_inputs,
    extract_abstract,
    extract_equations,
    extract_title,
    split_sections,
    strip_comments,
)
from .llm.gateway import LLMGateway
from .llm.provider import EmbeddingProvider, HashingEmbeddingProvider
from .model import (
    IMPLEMENTABLE_CATEGORIES,
    METHODOLOGY,
    CodeDraft,
    PaperMetadata,
    TechniqueDraft,
    code_id,
    count_tokens,
    make_paper_id,
)
from .rag import CachedEmbeddingProvider, build_index, index_files, split_text
from .storage import GraphStore

logger = logging.getLogger(__name__)

CORPUS_MANIFEST_NAME = "corpus.json"


@dataclass
class Environment:
    """Everything the pipeline talks to besides the store: chat gateway,
    source clients, and embedding providers keyed by model id."""

    gateway: LLMGateway
    arxiv: ArxivClient
    repo: RepoClient
    search: SearchClient | None = None
    embed_factory: Callable[[str], EmbeddingProvider] = HashingEmbeddingProvider
    _embedders: dict[str, CachedEmbeddingProvider] = field(default_factory=dict)

    def embedder(self, model_id: str) -> CachedEmbeddingProvider:
        if model_id not in self._embedders:
            self._embedders[model_id] = CachedEmbeddingProvider(self.embed_factory(model_id))
        return self._embedders[model_id]


@dataclass
class PaperBuildStats:
    paper_id: str
    title: str
    techniques: int = 0
    code_nodes: int = 0
    executable: int = 0
    pruned: int = 0
    resumed: bool = False


@dataclass
class BuildReport:
    target_id: str = ""
    references_found: int = 0
    reference_candidates: int = 0
    search_candidates: int = 0
    resolved: int = 0
    fetch_errors: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)
    papers: list[PaperBuildStats] = field(default_factory=list)
    source_tokens_total: int = 0
    llm_requests: int = 0
    llm_prompt_tokens: int = 0
    llm_reply_tokens: int = 0

    @property
    def paper_ids(self) -> list[str]:
        return [p.paper_id for p in self.papers]


@dataclass
class _PaperText:
    title: str
    abstract: str
    sections: list
    equations: list[str]
    body: str
    source_tokens: int


def _read_paper_text(bundle: LatexBundle, fallback_title: str = "", fallback_abstract: str = "") -> _PaperText:
    main = bundle.main_file()
    body = expand_inputs(bundle, strip_comments(bundle.files[main]))
    title = extract_title(body) or fallback_title
    if not title:
        raise PipelineError("ingest", f"cannot determine a title from {main}")
    abstract = extract_abstract(body) or fallback_abstract
    return _PaperText(
        title=title,
        abstract=abstract,
        sections=split_sections(body),
        equations=extract_equations(body),
        body=body,
        source_tokens=count_tokens("\n".join(bundle.files.values())),
    )


def _enrich_forest(
    env: Environment,
    cfg: Config,
    drafts: list[TechniqueDraft],
    paper_body: str,
) -> int:
    """Rewrite draft definitions in place against the paper text; returns
    how many definitions changed."""
    embedder = env.embedder(cfg.paper.embed_model)
    chunks = split_text(paper_body, chunk_size=cfg.paper.chunk_size, chunk_overlap=cfg.paper.chunk_overlap)
    paper_index = build_index(chunks, embedder)
    changed = 0

    def walk(draft: TechniqueDraft) -> None:
        nonlocal changed
        result = enrich_definition(
            env.gateway, draft.name, draft.definition, paper_index, embedder, cfg.paper
        )
        if result.changed:
            draft.definition_history.append(draft.definition)
            draft.definition = result.definition
            changed += 1
        for child in draft.children:
            walk(child)

    for draft in drafts:
        walk(draft)
    return changed


def _synthesize_for_paper(
    env: Environment,
    cfg: Config,
    pid: str,
    drafts: list[TechniqueDraft],
    repo_files: dict[str, str],
) -> dict[str, CodeDraft]:
    """Generate code drafts bottom-up and attach keys to the technique
    drafts. Leaves draw on repository snippets; parents compose their
    children's verified scripts; a parent with no coded children falls
    back to the leaf path."""
    code_drafts: dict[str, CodeDraft] = {}
    if not repo_files:
        return code_drafts
    embedder = env.embedder(cfg.code.embed_model)
    code_index = index_files(
        repo_files, embedder, chunk_size=cfg.code.chunk_size, chunk_overlap=cfg.code.chunk_overlap
    )
    limits = sandbox_limits_from_config(cfg.code)

    def unique_key(name: str) -> str:
        key = name
        n = 2
        while key in code_drafts:
            key = f"{name}-{n}"
            n += 1
        return key

    def synth(draft: TechniqueDraft) -> str | None:
        child_keys = []
        for child in draft.children:
            key = synth(child)
            if key is not None:
                child_keys.append(key)
        if draft.category not in IMPLEMENTABLE_CATEGORIES:
            return None
        technique_text = f"{draft.name}: {draft.definition}"
        if child_keys:
            blocks = "\n\n".join(
                f"--- {code_id(pid, k)} ---\n{code_drafts[k].test_script}" for k in child_keys
            )
            result = synthesize_composite(env.gateway, technique_text, blocks)
            provenance = [("code", code_id(pid, k)) for k in child_keys]
        else:
            bundle = locate_snippets(
                technique_text, repo_files, code_index, embedder, env.gateway, cfg.code
            )
            if not bundle.payload:
                logger.debug("no supporting snippets for %r; leaving it ungrounded", draft.name)
                return None
            result = synthesize_leaf(env.gateway, technique_text, bundle.payload)
            provenance = [("file", path) for path in bundle.files]
        if not verify_code(env.gateway, technique_text, result.test_script):
            logger.info("candidate for %r failed verification; discarding it", draft.name)
            return None
        if cfg.code.exec_check_code:
            outcome = self_debug(result.test_script, env.gateway, limits, cfg.code.max_debug_iters)
            implementation, test_script = split_script(outcome.script)
            executable: bool | None = outcome.executable
            iterations = outcome.iterations
        else:
            implementation, test_script = result.implementation, result.test_script
            executable = None
            iterations = 0
        key = unique_key(draft.name)
        code_drafts[key] = CodeDraft(
            implementation=implementation,
            test_script=test_script,
            documentation=result.documentation,
            executable=executable,
            provenance=provenance,
            debug_iterations=iterations,
        )
        draft.code_keys = [key]
        return key

    for draft in drafts:
        synth(draft)
    return code_drafts


def _methodology_keywords(drafts: list[TechniqueDraft]) -> list[str]:
    return [d.name for d in drafts if d.category == METHODOLOGY]


def build_graph(
    cfg: Config,
    env: Environment,
    target_source: str | Path,
    blacklist: Blacklist | None = None,
    store: GraphStore | None = None,
    resume: bool = True,
) -> tuple[KnowledgeGraph, BuildReport]:
    """Run the full construction pipeline.

    The target paper itself is persisted with its complete technique
    forest, unpruned: it has no official repository by definition, and
    its tree is what later planning runs against. Curated papers are
    pruned to their grounded cores.
    """
    blacklist = blacklist or Blacklist()
    graph = KnowledgeGraph()
    report = BuildReport()
    if store is not None:
        store.init()

    # --- target ----------------------------------------------------------
    try:
        target_path = Path(target_source)
        bundle = (
            LatexBundle.from_directory(target_path)
            if target_path.is_dir()
            else LatexBundle.from_tarball(target_path)
        )
        text = _read_paper_text(bundle)
        target_id = make_paper_id(text.title)
        report.target_id = target_id
        if store is not None and resume and store.has_paper(target_id):
            paper = store.load_paper(target_id)
            graph.papers[paper.id] = paper
            graph.edges |= paper.edges()
            target_drafts = _paper_to_drafts(graph, target_id)
            report.papers.append(
                PaperBuildStats(
                    paper_id=target_id,
                    title=paper.metadata.title,
                    techniques=len(paper.techniques),
                    resumed=True,
                )
            )
        else:
            target_drafts = extract_techniques(env.gateway, text.title, text.sections, text.equations)
            _enrich_forest(env, cfg, target_drafts, text.body)
            graph.add_paper(
                PaperMetadata(
                    title=text.title,
                    abstract=text.abstract,
                    source_tokens=text.source_tokens,
                ),
                target_drafts,
                {},
                paper_id=target_id,
            )
            if store is not None:
                store.upsert_paper(graph.get_paper(target_id))
            report.papers.append(
                PaperBuildStats(
                    paper_id=target_id,
                    title=text.title,
                    techniques=len(graph.get_paper(target_id).techniques),
                )
            )
    except PaperKGError as exc:
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError("target", str(exc)) from exc

    # --- curation --------------------------------------------------------
    try:
        references = extract_references(env.gateway, bundle.bbl_text())
        report.references_found = len(references)
        target_meta = graph.get_paper(target_id).metadata
        target_meta.references = list(references)
        if store is not None:
            store.upsert_paper(graph.get_paper(target_id))
        ranked = rank_references(
            env.gateway, text.title, text.abstract, references, cfg.global_.top_refs
        )
        report.reference_candidates = len(ranked)
        keywords = _methodology_keywords(target_drafts)
        searched: list[CandidatePaper] = []
        if env.search is not None and keywords:
            searched = retrieve_by_technique(
                env.search, keywords, [text.title] + [c.title for c in ranked]
            )
        report.search_candidates = len(searched)
        resolved, fetch_errors = resolve_sources(
            ranked + searched, env.arxiv, env.repo, env.gateway
        )
        report.fetch_errors = fetch_errors
        report.resolved = len(resolved)
        kept, dropped = filter_official(resolved, blacklist)
        report.dropped = dropped
    except PaperKGError as exc:
        raise PipelineError("curation", str(exc)) from exc

    # --- per-paper construction -----------------------------------------
    for paper in kept:
        pid = make_paper_id(paper.title, arxiv_id=paper.arxiv_id)
        try:
            if store is not None and resume and store.has_paper(pid):
                node = store.load_paper(pid)
                graph.papers[node.id] = node
                graph.edges |= node.edges()
                report.papers.append(
                    PaperBuildStats(
                        paper_id=pid,
                        title=node.metadata.title,
                        techniques=len(node.techniques),
                        code_nodes=len(node.code_registry),
                        executable=sum(1 for c in node.code_registry.values() if c.executable),
                        resumed=True,
                    )
                )
                continue
            stats = _build_one_paper(cfg, env, graph, pid, paper)
            report.papers.append(stats)
            if store is not None:
                store.upsert_paper(graph.get_paper(pid))
        except PaperKGError as exc:
            if isinstance(exc, PipelineError):
                raise
            raise PipelineError(f"paper:{pid}", str(exc)) from exc

    # --- persist corpus records -----------------------------------------
    if store is not None:
        write_corpus_manifest(
            store.root / CORPUS_MANIFEST_NAME,
            target={
                "id": target_id,
                "title": text.title,
                "source_tokens": text.source_tokens,
            },
            papers=[
                {
                    "title": p.title,
                    "arxiv_id": p.arxiv_id,
                    "repo_url": p.repo_url,
                    "origin": p.candidate.origin,
                }
                for p in kept
            ],
            dropped=report.dropped + report.fetch_errors,
        )

    violations = graph.validate()
    if violations:
        raise PipelineError("validate", "; ".join(str(v) for v in violations))

    report.source_tokens_total = graph.total_source_tokens()
    report.llm_requests = env.gateway.stats["requests"]
    report.llm_prompt_tokens = env.gateway.stats["prompt_tokens"]
    report.llm_reply_tokens = env.gateway.stats["reply_tokens"]
    return graph, report


def _build_one_paper(
    cfg: Config,
    env: Environment,
    graph: KnowledgeGraph,
    pid: str,
    paper: ResolvedPaper,
) -> PaperBuildStats:
    text = _read_paper_text(paper.bundle, fallback_title=paper.title, fallback_abstract=paper.abstract)
    drafts = extract_techniques(env.gateway, text.title, text.sections, text.equations)
    _enrich_forest(env, cfg, drafts, text.body)
    code_drafts = _synthesize_for_paper(env, cfg, pid, drafts, paper.repo_files)
    graph.add_paper(
        PaperMetadata(
            title=text.title,
            abstract=text.abstract,
            repo_url=paper.repo_url,
            source_tokens=text.source_tokens,
        ),
        drafts,
        code_drafts,
        paper_id=pid,
    )
    prune = graph.prune_ungrounded(pid)
    node = graph.get_paper(pid)
    return PaperBuildStats(
        paper_id=pid,
        title=text.title,
        techniques=len(node.techniques),
        code_nodes=len(node.code_registry),
        executable=sum(1 for c in node.code_registry.values() if c.executable),
        pruned=prune.removed_count,
    )


def _paper_to_drafts(graph: KnowledgeGraph, paper_id: str) -> list[TechniqueDraft]:
    """Reconstruct drafts from a stored paper (used when resuming the
    target, whose tree seeds the search keywords)."""
    paper = graph.get_paper(paper_id)

    def to_draft(tid: str) -> TechniqueDraft:
        node = paper.techniques[tid]
        return TechniqueDraft(
            name=node.name,
            category=node.category,
            definition=node.definition,
            children=[to_draft(c) for c in node.children],
            definition_history=list(node.definition_history),
        )

    return [to_draft(r) for r in paper.technique_roots]
