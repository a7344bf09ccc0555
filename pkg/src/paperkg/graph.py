"""Knowledge graph container: paper insertion, grounding-based pruning, validation.

The graph is single-writer, multi-reader: construction mutates it under
exclusive access, after which it is treated as immutable and safe for
unlimited concurrent reads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import (
    DanglingCodeRefError,
    DuplicatePaperError,
    TechniqueTreeError,
    UnknownPaperError,
)
from .model import (
    IMPLEMENTABLE_CATEGORIES,
    IMPLEMENTATION,
    STRUCTURAL,
    CodeDraft,
    CodeNode,
    Edge,
    PaperMetadata,
    PaperNode,
    TechniqueDraft,
    TechniqueNode,
    Violation,
    code_id,
    make_paper_id,
    slugify,
    technique_id,
    validate_edges,
    validate_paper,
)

logger = logging.getLogger(__name__)


@dataclass
class PruneReport:
    paper_id: str
    removed: list[str] = field(default_factory=list)
    kept: int = 0

    @property
    def removed_count(self) -> int:
        return len(self.removed)


@dataclass
class KnowledgeGraph:
    papers: dict[str, PaperNode] = field(default_factory=dict)
    edges: set[Edge] = field(default_factory=set)

    # --- construction -----------------------------------------------------

    def add_paper(
        self,
        metadata: PaperMetadata,
        technique_tree: list[TechniqueDraft],
        code_nodes: dict[str, CodeDraft],
        paper_id: str | None = None,
    ) -> str:
        """Insert a paper built from draft nodes; returns the paper id.

        Technique and code ids are derived from the paper id and node names,
        so inserting the same drafts twice is rejected as a duplicate rather
        than silently duplicating nodes.
        """
        pid = paper_id or make_paper_id(metadata.title)
        if pid in self.papers:
            raise DuplicatePaperError(f"paper {pid!r} already in graph")

        paper = PaperNode(id=pid, metadata=metadata)
        used_slugs: dict[str, int] = {}
        used_code_slugs: dict[str, int] = {}
        code_ids: dict[str, str] = {}

        def unique_id(name: str, used: dict[str, int]) -> str:
            slug = slugify(name)
            n = used.get(slug, 0)
            used[slug] = n + 1
            return name if n == 0 else f"{name}-{n + 1}"

        def insert(draft: TechniqueDraft) -> str:
            if id(draft) in on_path:
                raise TechniqueTreeError(f"cycle in technique tree at {draft.name!r}")
            if id(draft) in visited:
                raise TechniqueTreeError(f"technique {draft.name!r} attached more than once")
            on_path.add(id(draft))
            visited.add(id(draft))
            tid = technique_id(pid, unique_id(draft.name, used_slugs))
            refs: list[str] = []
            for key in draft.code_keys:
                if key not in code_nodes:
                    raise DanglingCodeRefError(f"technique {draft.name!r} references unknown code {key!r}")
                refs.append(resolve_code(key))
            node = TechniqueNode(
                id=tid,
                name=draft.name,
                category=draft.category,
                definition=draft.definition,
                code_refs=refs,
                definition_history=list(draft.definition_history),
            )
            paper.techniques[tid] = node
            for child in draft.children:
                node.children.append(insert(child))
            on_path.discard(id(draft))
            return tid

        def resolve_code(key: str) -> str:
            if key in code_ids:
                return code_ids[key]
            cid = code_id(pid, unique_id(key, used_code_slugs))
            draft = code_nodes[key]
            paper.code_registry[cid] = CodeNode(
                id=cid,
                implementation=draft.implementation,
                test_script=draft.test_script,
                documentation=draft.documentation,
                executable=draft.executable,
                provenance=[tuple(p) for p in draft.provenance],
                debug_iterations=draft.debug_iterations,
            )
            code_ids[key] = cid
            return cid

        visited: set[int] = set()
        on_path: set[int] = set()
        for root in technique_tree:
            paper.technique_roots.append(insert(root))

        violations = validate_paper(paper)
        if violations:
            raise TechniqueTreeError(
                "draft tree violates graph invariants: " + "; ".join(str(v) for v in violations)
            )
        self.papers[pid] = paper
        self.edges |= paper.edges()
        return pid

    # --- pruning ----------------------------------------------------------

    def prune_ungrounded(self, paper_id: str) -> PruneReport:
        """Remove Methodology/Technique nodes whose subtree has no code link.

        A node is grounded when it carries an implementation edge itself or
        any of its descendants does; grounding propagates upward so a parent
        of a grounded child survives. Finding and Resource nodes are exempt:
        their categories are descriptive and never carry code. Surviving
        nodes orphaned by a removed ancestor are promoted to roots in
        document order. Applying the operation twice equals applying it once.
        """
        paper = self.papers.get(paper_id)
        if paper is None:
            raise UnknownPaperError(f"unknown paper {paper_id!r}")

        grounded: dict[str, bool] = {}

        def walk(tid: str) -> bool:
            node = paper.techniques[tid]
            has_code = bool(node.code_refs)
            for child in node.children:
                if walk(child):
                    has_code = True
            grounded[tid] = has_code
            return has_code

        for root in paper.technique_roots:
            walk(root)

        survivors = {
            tid
            for tid, node in paper.techniques.items()
            if node.category not in IMPLEMENTABLE_CATEGORIES or grounded[tid]
        }
        removed = [n.id for n in paper.iter_techniques_preorder() if n.id not in survivors]
        if not removed:
            return PruneReport(paper_id=paper_id, kept=len(paper.techniques))

        new_roots: list[str] = []

        def collect_roots(tid: str, parent_survives: bool) -> None:
            alive = tid in survivors
            if alive and not parent_survives:
                new_roots.append(tid)
            for child in paper.techniques[tid].children:
                collect_roots(child, alive)

        for root in paper.technique_roots:
            collect_roots(root, False)

        removed_set = set(removed)
        for tid in removed:
            del paper.techniques[tid]
        for node in paper.techniques.values():
            node.children = [c for c in node.children if c not in removed_set]
        paper.technique_roots = new_roots
        self.edges = {
            e for e in self.edges if e.src not in removed_set and e.dst not in removed_set
        }
        logger.debug("pruned %d ungrounded techniques from %s", len(removed), paper_id)
        return PruneReport(paper_id=paper_id, removed=removed, kept=len(paper.techniques))

    # --- validation -------------------------------------------------------

    def validate(self) -> list[Violation]:
        """Collect every invariant violation in the graph; empty means valid."""
        out: list[Violation] = []
        all_techniques: set[str] = set()
        for pid, paper in self.papers.items():
            if paper.id != pid:
                out.append(Violation("paper-id-consistent", pid, f"registered as {pid} but node.id = {paper.id}"))
            out.extend(validate_paper(paper))
            out.extend(validate_edges(paper, self.edges))
            all_techniques |= set(paper.techniques)
        for edge in self.edges:
            if edge.src not in all_techniques:
                out.append(Violation("edge-src-exists", f"{edge.src}->{edge.dst}", "edge source is not a known technique"))
        return out

    # --- read helpers -----------------------------------------------------

    def get_paper(self, paper_id: str) -> PaperNode:
        paper = self.papers.get(paper_id)
        if paper is None:
            raise UnknownPaperError(f"unknown paper {paper_id!r}")
        return paper

    def total_source_tokens(self) -> int:
        """Corpus-scale accounting: sum of per-paper ingested source tokens."""
        return sum(p.metadata.source_tokens for p in self.papers.values())


def add_paper(
    graph: KnowledgeGraph,
    metadata: PaperMetadata,
    technique_tree: list[TechniqueDraft],
    code_nodes: dict[str, CodeDraft],
    paper_id: str | None = None,
) -> str:
    return graph.add_paper(metadata, technique_tree, code_nodes, paper_id=paper_id)


def prune_ungrounded(graph: KnowledgeGraph, paper_id: str) -> PruneReport:
    return graph.prune_ungrounded(paper_id)


def validate(graph: KnowledgeGraph) -> list[Violation]:
    return graph.validate()
