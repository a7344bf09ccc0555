"""Turn paper text into a technique forest, then sharpen definitions
against the paper's own prose.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .config import PaperConfig
from .errors import ExtractionError
from .latex import Section
from .llm.gateway import LLMGateway
from .llm.provider import EmbeddingProvider
from .llm.templates import NONE_ANSWER
from .model import CATEGORIES, IMPLEMENTABLE_CATEGORIES, TechniqueDraft
from .rag import VectorIndex, query_index

logger = logging.getLogger(__name__)

MAX_FOREST_DEPTH = 4


def format_sections(sections: list[Section]) -> str:
    parts = []
    for section in sections:
        if section.title:
            parts.append(f"## {section.title}\n{section.text}")
        else:
            parts.append(section.text)
    return "\n\n".join(p for p in parts if p.strip())


def format_equations(equations: list[str]) -> str:
    return "\n".join(f"({i + 1}) {eq}" for i, eq in enumerate(equations))


def _to_draft(entry: dict, depth: int, where: str) -> TechniqueDraft:
    name = entry["name"].strip()
    category = entry["category"].strip()
    definition = entry["definition"].strip()
    if not name:
        raise ExtractionError(f"{where}: empty technique name")
    if category not in CATEGORIES:
        raise ExtractionError(f"{where}: unknown category {category!r} for {name!r}")
    if not definition:
        raise ExtractionError(f"{where}: empty definition for {name!r}")
    raw_children = entry.get("children", [])
    if raw_children and category not in IMPLEMENTABLE_CATEGORIES:
        raise ExtractionError(f"{where}: {category} entry {name!r} must be a leaf")
    children = []
    if raw_children and depth >= MAX_FOREST_DEPTH:
        logger.warning(
            "technique %r sits at the depth cap (%d); dropping its %d children",
            name,
            MAX_FOREST_DEPTH,
            len(raw_children),
        )
    elif raw_children:
        children = [
            _to_draft(child, depth + 1, f"{where}.children[{i}]")
            for i, child in enumerate(raw_children)
        ]
    return TechniqueDraft(name=name, category=category, definition=definition, children=children)


def extract_techniques(
    gateway: LLMGateway,
    title: str,
    sections: list[Section],
    equations: list[str],
) -> list[TechniqueDraft]:
    """Extract the paper's contribution forest from its text.

    Empty input yields an empty forest without a chat call. Entries
    deeper than the depth cap lose their children rather than failing
    the whole paper.
    """
    sections_text = format_sections(sections)
    equations_text = format_equations(equations)
    if not sections_text.strip() and not equations_text.strip():
        return []
    reply = gateway.chat(
        "paper_contributions",
        {"title": title, "sections": sections_text, "equations": equations_text},
        role="paper",
    )
    if reply is NONE_ANSWER:
        return []
    return [_to_draft(entry, 1, f"forest[{i}]") for i, entry in enumerate(reply)]


@dataclass
class EnrichmentResult:
    definition: str
    changed: bool
    consulted: bool  # whether paper passages were retrieved and shown


def enrich_definition(
    gateway: LLMGateway,
    name: str,
    definition: str,
    paper_index: VectorIndex,
    embed_provider: EmbeddingProvider,
    cfg: PaperConfig,
) -> EnrichmentResult:
    """Rewrite one definition using the paper passages nearest to it.

    When nothing in the paper lands above the similarity floor, the
    original definition stands and no chat call is spent.
    """
    original = definition
    if not paper_index.chunks:
        return EnrichmentResult(definition=original, changed=False, consulted=False)
    query = f"{name}: {definition}"
    query_vec = embed_provider.embed([query])[0]
    hits = query_index(paper_index, query_vec, cfg.top_k)
    hits = [h for h in hits if h.similarity >= cfg.retriever.min_similarity]
    if not hits:
        logger.debug("no paper passage above similarity floor for %r; keeping definition", name)
        return EnrichmentResult(definition=original, changed=False, consulted=False)
    context = "\n---\n".join(h.chunk.text for h in hits)
    reply = gateway.chat(
        "rewrite_technique",
        {"technique": f"{name}: {definition}", "context": context},
        role="paper",
    )
    if reply is NONE_ANSWER or reply.strip() == original.strip():
        return EnrichmentResult(definition=original, changed=False, consulted=True)
    return EnrichmentResult(definition=reply.strip(), changed=True, consulted=True)
