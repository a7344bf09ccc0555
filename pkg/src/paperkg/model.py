"""Data model for the knowledge graph: papers, techniques, code nodes, edges.

A paper node owns a technique forest and a registry of code nodes. Technique
nodes link to each other through structural edges (parent -> child) and to
code nodes through implementation edges. Identifiers are deterministic so
that rebuilding the same corpus yields the same graph.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

METHODOLOGY = "Methodology"
TECHNIQUE = "Technique"
FINDING = "Finding"
RESOURCE = "Resource"

CATEGORIES = (METHODOLOGY, TECHNIQUE, FINDING, RESOURCE)

# Categories that are expected to be backed by runnable code. Finding and
# Resource nodes are descriptive by definition and never carry children.
IMPLEMENTABLE_CATEGORIES = frozenset({METHODOLOGY, TECHNIQUE})

STRUCTURAL = "structural"
IMPLEMENTATION = "implementation"

_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(name: str) -> str:
    """Stable lowercase slug used for technique and code identifiers."""
    slug = _SLUG_RE.sub("-", name.lower()).strip("-")
    return slug or "unnamed"


def make_paper_id(title: str, arxiv_id: str | None = None) -> str:
    """Paper id: the arXiv id when known, otherwise a hash of the title."""
    if arxiv_id:
        return arxiv_id
    digest = hashlib.sha256(title.strip().casefold().encode("utf-8")).hexdigest()
    return f"paper-{digest[:16]}"


def technique_id(paper_id: str, name: str) -> str:
    return f"{paper_id}/t/{slugify(name)}"


def code_id(paper_id: str, name: str) -> str:
    return f"{paper_id}/c/{slugify(name)}"


def count_tokens(text: str) -> int:
    """Whitespace token count used for source-size accounting."""
    return len(text.split())


@dataclass
class PaperMetadata:
    title: str
    abstract: str = ""
    references: list[str] = field(default_factory=list)
    repo_url: str | None = None
    source_tokens: int = 0


@dataclass
class TechniqueNode:
    id: str
    name: str
    category: str
    definition: str = ""
    children: list[str] = field(default_factory=list)
    code_refs: list[str] = field(default_factory=list)
    # Earlier definitions, oldest first; appended to whenever enrichment
    # rewrites the definition.
    definition_history: list[str] = field(default_factory=list)


@dataclass
class CodeNode:
    id: str
    implementation: str
    test_script: str
    documentation: str = ""
    # True: last sandbox run of test_script passed. False: it failed.
    # None: never executed (execution checking disabled at build time).
    executable: bool | None = None
    provenance: list[tuple[str, str]] = field(default_factory=list)
    debug_iterations: int = 0


@dataclass(frozen=True)
class Edge:
    kind: str  # STRUCTURAL or IMPLEMENTATION
    src: str
    dst: str


@dataclass
class PaperNode:
    id: str
    metadata: PaperMetadata
    techniques: dict[str, TechniqueNode] = field(default_factory=dict)
    technique_roots: list[str] = field(default_factory=list)
    code_registry: dict[str, CodeNode] = field(default_factory=dict)

    def iter_techniques_preorder(self):
        """Yield technique nodes in document order (depth-first from roots)."""
        for root in self.technique_roots:
            stack = [root]
            while stack:
                tid = stack.pop()
                node = self.techniques[tid]
                yield node
                stack.extend(reversed(node.children))

    def edges(self) -> set[Edge]:
        """Materialize the structural and implementation edges of this paper."""
        out: set[Edge] = set()
        for node in self.techniques.values():
            for child in node.children:
                out.add(Edge(STRUCTURAL, node.id, child))
            for ref in node.code_refs:
                out.add(Edge(IMPLEMENTATION, node.id, ref))
        return out


# --- Draft inputs ----------------------------------------------------------
#
# Drafts are what the extraction and codegen pipelines hand to the graph:
# nested technique trees without ids, and code bodies keyed by name. The
# graph assigns deterministic ids when the paper is inserted.


@dataclass
class TechniqueDraft:
    name: str
    category: str
    definition: str = ""
    children: list["TechniqueDraft"] = field(default_factory=list)
    code_keys: list[str] = field(default_factory=list)
    definition_history: list[str] = field(default_factory=list)


@dataclass
class CodeDraft:
    implementation: str
    test_script: str
    documentation: str = ""
    executable: bool | None = None
    provenance: list[tuple[str, str]] = field(default_factory=list)
    debug_iterations: int = 0


# --- Validation ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.subject}: {self.message}"


def _has_duplicates(items: list[str]) -> bool:
    return len(items) != len(set(items))


def validate_paper(paper: PaperNode) -> list[Violation]:
    """Check every per-paper invariant; violations are data, not errors."""
    out: list[Violation] = []
    meta = paper.metadata
    if not meta.title.strip():
        out.append(Violation("title-nonempty", paper.id, "metadata title is empty"))
    if _has_duplicates(meta.references):
        out.append(Violation("references-deduped", paper.id, "duplicate reference titles"))
    if meta.source_tokens < 0:
        out.append(Violation("source-tokens-nonnegative", paper.id, f"source_tokens = {meta.source_tokens}"))

    for tid, node in paper.techniques.items():
        if node.id != tid:
            out.append(Violation("technique-id-consistent", tid, f"registered as {tid} but node.id = {node.id}"))
        if not node.name.strip():
            out.append(Violation("name-nonempty", tid, "technique name is empty"))
        if node.category not in CATEGORIES:
            out.append(Violation("category-valid", tid, f"unknown category {node.category!r}"))
        if node.category not in IMPLEMENTABLE_CATEGORIES and node.children:
            out.append(Violation("child-category", tid, f"{node.category} node has children"))
        for child in node.children:
            if child not in paper.techniques:
                out.append(Violation("child-exists", tid, f"child {child} not in technique set"))
        for ref in node.code_refs:
            if ref not in paper.code_registry:
                out.append(Violation("code-ref-resolvable", tid, f"code ref {ref} not in registry"))

    # Forest shape: every technique appears exactly once across the roots and
    # all children lists, and every registered technique is reachable.
    placements: list[str] = list(paper.technique_roots)
    for node in paper.techniques.values():
        placements.extend(node.children)
    known_placements = [tid for tid in placements if tid in paper.techniques]
    if _has_duplicates(known_placements):
        seen: set[str] = set()
        for tid in known_placements:
            if tid in seen:
                out.append(Violation("single-parent", tid, "technique attached more than once"))
            seen.add(tid)
    for root in paper.technique_roots:
        if root not in paper.techniques:
            out.append(Violation("root-exists", paper.id, f"root {root} not in technique set"))
    reachable = _reachable_from_roots(paper)
    for tid in paper.techniques:
        if tid not in reachable:
            out.append(Violation("technique-reachable", tid, "not reachable from technique_roots"))

    for cid, code in paper.code_registry.items():
        if code.id != cid:
            out.append(Violation("code-id-consistent", cid, f"registered as {cid} but node.id = {code.id}"))
        if code.debug_iterations < 0:
            out.append(Violation("debug-iterations-nonnegative", cid, f"debug_iterations = {code.debug_iterations}"))
    return out


def _reachable_from_roots(paper: PaperNode) -> set[str]:
    seen: set[str] = set()
    stack = [tid for tid in paper.technique_roots if tid in paper.techniques]
    while stack:
        tid = stack.pop()
        if tid in seen:
            continue
        seen.add(tid)
        for child in paper.techniques[tid].children:
            if child in paper.techniques and child not in seen:
                stack.append(child)
    return seen


def validate_edges(paper: PaperNode, edges: set[Edge]) -> list[Violation]:
    """Check edge-kind rules for the subset of ``edges`` owned by ``paper``."""
    out: list[Violation] = []
    owned = {e for e in edges if e.src in paper.techniques}
    ill_formed: set[Edge] = set()
    for edge in owned:
        if edge.kind == STRUCTURAL:
            if edge.dst not in paper.techniques:
                out.append(Violation("edge-kind", f"{edge.src}->{edge.dst}", "structural edge must join technique to technique"))
                ill_formed.add(edge)
        elif edge.kind == IMPLEMENTATION:
            if edge.dst not in paper.code_registry:
                out.append(Violation("edge-kind", f"{edge.src}->{edge.dst}", "implementation edge must join technique to code"))
                ill_formed.add(edge)
        else:
            out.append(Violation("edge-kind", f"{edge.src}->{edge.dst}", f"unknown edge kind {edge.kind!r}"))
            ill_formed.add(edge)
    if (owned - ill_formed) != paper.edges():
        out.append(Violation("edges-derived", paper.id, "materialized edges disagree with node links"))
    return out


def format_technique(node: TechniqueNode | TechniqueDraft) -> str:
    """Render a technique as the text payload used in prompts and queries."""
    name = node.name
    definition = node.definition
    if definition:
        return f"{name}: {definition}"
    return name
