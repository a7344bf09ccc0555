"""paperkg: executable knowledge graphs from papers and their code.

Build a graph that pairs the technique hierarchy of research papers
with small, sandbox-verified scripts distilled from their official
repositories, then query it in two stages: a lightweight planning view
first, grounded implementation retrieval second.
"""

from .config import Config, default_config, load_config, save_config
from .errors import (
    ConfigError,
    ContractViolationError,
    DanglingCodeRefError,
    DuplicatePaperError,
    EmbeddingDimensionError,
    ExtractionError,
    FetchError,
    GraphError,
    PaperKGError,
    PipelineError,
    ProviderError,
    SandboxError,
    SearchUnavailableError,
    StorageError,
    TechniqueTreeError,
    TemplateError,
    UnknownPaperError,
)
from .graph import KnowledgeGraph, PruneReport, add_paper, prune_ungrounded, validate
from .model import (
    CATEGORIES,
    FINDING,
    IMPLEMENTATION,
    METHODOLOGY,
    RESOURCE,
    STRUCTURAL,
    TECHNIQUE,
    CodeDraft,
    CodeNode,
    Edge,
    PaperMetadata,
    PaperNode,
    TechniqueDraft,
    TechniqueNode,
    Violation,
    make_paper_id,
)
from .pipeline import BuildReport, Environment, build_graph
from .query import (
    PlanningView,
    RerankResult,
    RetrievalHit,
    decompose_task,
    fetch_planning_context,
    rerank_and_guide,
    retrieve_implementations,
)
from .storage import GraphStore, load_paper, save_paper

__version__ = "0.1.0"

__all__ = [
    "BuildReport",
    "CATEGORIES",
    "CodeDraft",
    "CodeNode",
    "Config",
    "ConfigError",
    "ContractViolationError",
    "DanglingCodeRefError",
    "DuplicatePaperError",
    "Edge",
    "EmbeddingDimensionError",
    "Environment",
    "ExtractionError",
    "FINDING",
    "FetchError",
    "GraphError",
    "GraphStore",
    "IMPLEMENTATION",
    "KnowledgeGraph",
    "METHODOLOGY",
    "PaperKGError",
    "PaperMetadata",
    "PaperNode",
    "PipelineError",
    "PlanningView",
    "ProviderError",
    "PruneReport",
    "RESOURCE",
    "RerankResult",
    "RetrievalHit",
    "STRUCTURAL",
    "SandboxError",
    "SearchUnavailableError",
    "StorageError",
    "TECHNIQUE",
    "TechniqueDraft",
    "TechniqueNode",
    "TechniqueTreeError",
    "TemplateError",
    "UnknownPaperError",
    "Violation",
    "add_paper",
    "build_graph",
    "decompose_task",
    "default_config",
    "fetch_planning_context",
    "load_config",
    "load_paper",
    "make_paper_id",
    "prune_ungrounded",
    "rerank_and_guide",
    "retrieve_implementations",
    "save_config",
    "save_paper",
    "validate",
]
