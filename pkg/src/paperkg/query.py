"""Two-stage access to the graph.

Stage one hands an agent the technique forests with no code bodies, so
planning stays cheap. Stage two retrieves grounded technique/code pairs
for a concrete subtask, filtered by similarity and optionally reranked
by a model that also writes usage guidance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import ContractViolationError, ProviderError
from .graph import KnowledgeGraph
from .llm.gateway import LLMGateway
from .llm.provider import EmbeddingProvider
from .llm.templates import NONE_ANSWER
from .config import RetrieveConfig
from .model import CodeNode, TechniqueNode, format_technique
from .rag import cosine_similarity

logger = logging.getLogger(__name__)


def embedding_text_for_technique(node: TechniqueNode) -> str:
    return format_technique(node)


@dataclass
class PlanningTechnique:
    id: str
    name: str
    category: str
    definition: str
    code_ids: list[str] = field(default_factory=list)
    children: list["PlanningTechnique"] = field(default_factory=list)

    @property
    def has_code(self) -> bool:
        return bool(self.code_ids)


@dataclass
class PlanningPaper:
    id: str
    title: str
    abstract: str
    techniques: list[PlanningTechnique] = field(default_factory=list)


@dataclass
class PlanningView:
    """Everything an agent needs to plan, nothing it needs to execute.

    Carries names, categories, definitions, and code availability;
    implementation and test bodies never appear here.
    """

    papers: list[PlanningPaper] = field(default_factory=list)

    def to_doc(self) -> str:
        lines = []
        for paper in self.papers:
            lines.append(f"# {paper.title} ({paper.id})")

            def walk(node: PlanningTechnique, depth: int) -> None:
                marker = f" [implementations: {len(node.code_ids)}]" if node.code_ids else ""
                lines.append("  " * depth + f"- [{node.category}] {node.name}: {node.definition}{marker}")
                for child in node.children:
                    walk(child, depth + 1)

            for root in paper.techniques:
                walk(root, 1)
        return "\n".join(lines)

    def to_json(self) -> dict:
        def encode(node: PlanningTechnique) -> dict:
            return {
                "id": node.id,
                "name": node.name,
                "category": node.category,
                "definition": node.definition,
                "code_ids": list(node.code_ids),
                "children": [encode(c) for c in node.children],
            }

        return {
            "papers": [
                {
                    "id": p.id,
                    "title": p.title,
                    "abstract": p.abstract,
                    "techniques": [encode(t) for t in p.techniques],
                }
                for p in self.papers
            ]
        }


def fetch_planning_context(graph: KnowledgeGraph) -> PlanningView:
    """Project the graph onto its planning view, papers in id order."""
    papers = []
    for paper_id in sorted(graph.papers):
        paper = graph.papers[paper_id]

        def project(tid: str) -> PlanningTechnique:
            node = paper.techniques[tid]
            return PlanningTechnique(
                id=node.id,
                name=node.name,
                category=node.category,
                definition=node.definition,
                code_ids=list(node.code_refs),
                children=[project(c) for c in node.children],
            )

        papers.append(
            PlanningPaper(
                id=paper.id,
                title=paper.metadata.title,
                abstract=paper.metadata.abstract,
                techniques=[project(r) for r in paper.technique_roots],
            )
        )
    return PlanningView(papers=papers)


@dataclass
class RetrievalHit:
    paper_id: str
    technique_id: str
    technique_name: str
    definition: str
    code_id: str
    similarity: float
    code: CodeNode


def retrieve_implementations(
    graph: KnowledgeGraph,
    query_text: str,
    embed_provider: EmbeddingProvider,
    cfg: RetrieveConfig,
) -> list[RetrievalHit]:
    """Grounded technique/code pairs similar enough to the query.

    Only techniques that carry implementations participate. The
    technique threshold always applies; the per-paper threshold applies
    only when the paper prefilter is enabled. Results are capped and
    ordered by (similarity desc, technique id, code id).
    """
    if not query_text.strip():
        raise ValueError("query_text must be non-empty")
    candidates: list[tuple[str, TechniqueNode]] = []
    paper_texts: dict[str, str] = {}
    for paper_id in sorted(graph.papers):
        paper = graph.papers[paper_id]
        paper_texts[paper_id] = f"{paper.metadata.title}\n{paper.metadata.abstract}"
        for tid in sorted(paper.techniques):
            node = paper.techniques[tid]
            if node.code_refs:
                candidates.append((paper_id, node))
    if not candidates:
        return []

    texts = [query_text]
    if cfg.filter_by_paper:
        texts.extend(paper_texts[pid] for pid in sorted(paper_texts))
    texts.extend(embedding_text_for_technique(node) for _, node in candidates)
    vectors = embed_provider.embed(texts)
    query_vec = vectors[0]
    cursor = 1
    allowed_papers = set(paper_texts)
    if cfg.filter_by_paper:
        allowed_papers = set()
        for pid in sorted(paper_texts):
            if cosine_similarity(query_vec, vectors[cursor]) >= cfg.paper_similarity:
                allowed_papers.add(pid)
            cursor += 1

    hits = []
    for (paper_id, node), vec in zip(candidates, vectors[cursor:]):
        if paper_id not in allowed_papers:
            continue
        similarity = cosine_similarity(query_vec, vec)
        if similarity < cfg.technique_similarity:
            continue
        paper = graph.papers[paper_id]
        for code_id in node.code_refs:
            hits.append(
                RetrievalHit(
                    paper_id=paper_id,
                    technique_id=node.id,
                    technique_name=node.name,
                    definition=node.definition,
                    code_id=code_id,
                    similarity=similarity,
                    code=paper.code_registry[code_id],
                )
            )
    hits.sort(key=lambda h: (-h.similarity, h.technique_id, h.code_id))
    return hits[: cfg.max_hits]


def decompose_task(gateway: LLMGateway, task: str, overview: str) -> list[str]:
    """Split a task into subtasks; an atomic task comes back as no parts."""
    if not task.strip():
        raise ValueError("task must be non-empty")
    reply = gateway.chat("decompose_task", {"task": task, "overview": overview})
    if reply is NONE_ANSWER:
        return []
    return [part.strip() for part in reply if part.strip()]


@dataclass
class RerankResult:
    hits: list[RetrievalHit]
    guidance: str


def rerank_and_guide(gateway: LLMGateway, task: str, hits: list[RetrievalHit]) -> RerankResult:
    """Model pass over retrieved hits: keep the useful ones, in the
    model's order, with prose guidance on applying them.

    Names the model invents are dropped with a warning. If the call
    fails outright, the original ordering survives with no guidance.
    """
    if not hits:
        raise ValueError("hits must be non-empty")
    listing = []
    seen_names = []
    for hit in hits:
        if hit.technique_name not in seen_names:
            seen_names.append(hit.technique_name)
            listing.append(f"{hit.technique_name}: {hit.definition}")
    try:
        names, guidance = gateway.chat(
            "rerank_techniques",
            {"task": task, "techniques": "\n".join(listing)},
        )
    except (ProviderError, ContractViolationError) as exc:
        logger.warning("rerank failed (%s); keeping retrieval order", exc)
        return RerankResult(hits=list(hits), guidance="")
    ordered = []
    for name in names:
        matching = [h for h in hits if h.technique_name == name]
        if not matching:
            logger.warning("reranker named unknown technique %r; dropping it", name)
            continue
        ordered.extend(m for m in matching if m not in ordered)
    return RerankResult(hits=ordered, guidance=guidance)
