"""Persistence: one JSON document per paper plus a directory manifest.

Documents are UTF-8 JSON with sorted keys and fixed indentation so that
re-saving an unchanged paper is byte-stable and diffs stay reproducible.
The technique-to-code relationship is serialized as a key-value mapping
(``implementations``) rather than inline fields.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .errors import GraphError, StorageError
from .graph import KnowledgeGraph
from .model import (
    CodeNode,
    PaperMetadata,
    PaperNode,
    TechniqueNode,
    validate_paper,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


def _dump(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def paper_to_doc(paper: PaperNode) -> dict:
    techniques = {}
    implementations = {}
    for tid, node in paper.techniques.items():
        techniques[tid] = {
            "name": node.name,
            "category": node.category,
            "definition": node.definition,
            "definition_history": list(node.definition_history),
            "children": list(node.children),
        }
        if node.code_refs:
            implementations[tid] = list(node.code_refs)
    code_nodes = {}
    for cid, code in paper.code_registry.items():
        code_nodes[cid] = {
            "implementation": code.implementation,
            "test_script": code.test_script,
            "documentation": code.documentation,
            "executable": code.executable,
            "provenance": [list(p) for p in code.provenance],
            "debug_iterations": code.debug_iterations,
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "id": paper.id,
        "metadata": {
            "title": paper.metadata.title,
            "abstract": paper.metadata.abstract,
            "references": list(paper.metadata.references),
            "repo_url": paper.metadata.repo_url,
            "source_tokens": paper.metadata.source_tokens,
        },
        "technique_roots": list(paper.technique_roots),
        "techniques": techniques,
        "implementations": implementations,
        "code_nodes": code_nodes,
    }


def save_paper(paper: PaperNode) -> bytes:
    """Serialize a validated paper to its canonical document bytes."""
    violations = validate_paper(paper)
    if violations:
        raise GraphError("cannot save invalid paper: " + "; ".join(str(v) for v in violations))
    return _dump(paper_to_doc(paper))


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise StorageError(f"malformed document: missing {key!r} in {where}")
    value = doc[key]
    if not isinstance(value, kind):
        raise StorageError(f"malformed document: {where}.{key} has type {type(value).__name__}")
    return value


def load_paper(data: bytes) -> PaperNode:
    """Parse document bytes back into a paper node; inverse of save_paper."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise StorageError(f"malformed document: not valid UTF-8 at byte {exc.start}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise StorageError(f"malformed document: {exc.msg} at byte {offset}") from exc
    if not isinstance(doc, dict):
        raise StorageError("malformed document: top level is not an object")

    version = _require(doc, "schema_version", int, "document")
    if version != SCHEMA_VERSION:
        raise StorageError(f"unknown schema version {version}")

    meta_doc = _require(doc, "metadata", dict, "document")
    metadata = PaperMetadata(
        title=_require(meta_doc, "title", str, "metadata"),
        abstract=_require(meta_doc, "abstract", str, "metadata"),
        references=list(_require(meta_doc, "references", list, "metadata")),
        repo_url=meta_doc.get("repo_url"),
        source_tokens=_require(meta_doc, "source_tokens", int, "metadata"),
    )
    paper = PaperNode(
        id=_require(doc, "id", str, "document"),
        metadata=metadata,
        technique_roots=list(_require(doc, "technique_roots", list, "document")),
    )
    implementations = _require(doc, "implementations", dict, "document")
    for tid, tdoc in _require(doc, "techniques", dict, "document").items():
        if not isinstance(tdoc, dict):
            raise StorageError(f"malformed document: technique {tid} is not an object")
        paper.techniques[tid] = TechniqueNode(
            id=tid,
            name=_require(tdoc, "name", str, tid),
            category=_require(tdoc, "category", str, tid),
            definition=_require(tdoc, "definition", str, tid),
            definition_history=list(tdoc.get("definition_history", [])),
            children=list(_require(tdoc, "children", list, tid)),
            code_refs=list(implementations.get(tid, [])),
        )
    for cid, cdoc in _require(doc, "code_nodes", dict, "document").items():
        if not isinstance(cdoc, dict):
            raise StorageError(f"malformed document: code node {cid} is not an object")
        executable = cdoc.get("executable")
        if executable is not None and not isinstance(executable, bool):
            raise StorageError(f"malformed document: {cid}.executable has type {type(executable).__name__}")
        paper.code_registry[cid] = CodeNode(
            id=cid,
            implementation=_require(cdoc, "implementation", str, cid),
            test_script=_require(cdoc, "test_script", str, cid),
            documentation=_require(cdoc, "documentation", str, cid),
            executable=executable,
            provenance=[tuple(p) for p in _require(cdoc, "provenance", list, cid)],
            debug_iterations=_require(cdoc, "debug_iterations", int, cid),
        )

    violations = validate_paper(paper)
    if violations:
        raise StorageError("malformed document: " + "; ".join(str(v) for v in violations))
    return paper


class GraphStore:
    """Directory-backed graph storage: ``<dir>/<paper_id>.json`` + manifest.

    Upserts are idempotent and keyed by deterministic paper ids, which is
    what makes interrupted builds resumable without duplicating nodes.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _paper_path(self, paper_id: str) -> Path:
        # Paper ids may contain '/' (never in practice for arXiv ids, but
        # hashes and slugs stay flat); keep the file name safe regardless.
        return self.root / (paper_id.replace("/", "_") + ".json")

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def exists(self) -> bool:
        return self.manifest_path.is_file()

    def init(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        if not self.manifest_path.exists():
            self._write_manifest([])

    def _write_manifest(self, paper_ids: list[str]) -> None:
        doc = {"schema_version": SCHEMA_VERSION, "papers": sorted(set(paper_ids))}
        self.manifest_path.write_bytes(_dump(doc))

    def read_manifest(self) -> list[str]:
        if not self.manifest_path.is_file():
            raise StorageError(f"no manifest at {self.manifest_path}")
        try:
            doc = json.loads(self.manifest_path.read_text("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise StorageError(f"corrupt manifest: {exc}") from exc
        if not isinstance(doc, dict):
            raise StorageError("corrupt manifest: top level is not an object")
        version = _require(doc, "schema_version", int, "manifest")
        if version != SCHEMA_VERSION:
            raise StorageError(f"unknown schema version {version}")
        papers = _require(doc, "papers", list, "manifest")
        if not all(isinstance(p, str) for p in papers):
            raise StorageError("corrupt manifest: paper ids must be strings")
        return list(papers)

    def upsert_paper(self, paper: PaperNode) -> None:
        self.init()
        self._paper_path(paper.id).write_bytes(save_paper(paper))
        ids = set(self.read_manifest())
        if paper.id not in ids:
            self._write_manifest([*ids, paper.id])

    def has_paper(self, paper_id: str) -> bool:
        return self.exists() and paper_id in self.read_manifest()

    def load_paper(self, paper_id: str) -> PaperNode:
        path = self._paper_path(paper_id)
        if not path.is_file():
            raise StorageError(f"manifest lists {paper_id} but {path} is missing")
        return load_paper(path.read_bytes())

    def save_graph(self, graph: KnowledgeGraph) -> None:
        self.init()
        for paper in graph.papers.values():
            self._paper_path(paper.id).write_bytes(save_paper(paper))
        self._write_manifest(list(graph.papers))

    def load_graph(self) -> KnowledgeGraph:
        graph = KnowledgeGraph()
        for paper_id in self.read_manifest():
            paper = self.load_paper(paper_id)
            if paper.id != paper_id:
                raise StorageError(f"document id {paper.id!r} disagrees with manifest entry {paper_id!r}")
            graph.papers[paper.id] = paper
            graph.edges |= paper.edges()
        logger.debug("loaded %d papers from %s", len(graph.papers), self.root)
        return graph
