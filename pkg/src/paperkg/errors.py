"""Exception types shared across paperkg modules."""


class PaperKGError(Exception):
    """Base class for all paperkg errors."""


class GraphError(PaperKGError):
    """Invalid graph mutation or lookup."""


class DuplicatePaperError(GraphError):
    pass


class UnknownPaperError(GraphError):
    pass


class DanglingCodeRefError(GraphError):
    pass


class TechniqueTreeError(GraphError):
    """Cycle or shared node in a technique tree."""


class StorageError(PaperKGError):
    """Malformed, truncated, or unknown-version stored document."""


class ConfigError(PaperKGError):
    """Invalid configuration document or key."""


class ProviderError(PaperKGError):
    """Transport-level failure talking to a model provider (retryable)."""


class ContractViolationError(PaperKGError):
    """Provider output did not satisfy the template's answer contract."""


class TemplateError(PaperKGError):
    """Unknown template or unbound/unknown slot at render time."""


class EmbeddingDimensionError(PaperKGError):
    """Provider returned vectors of inconsistent or unexpected dimension."""


class SandboxError(PaperKGError):
    """Sandbox could not be set up or the interpreter is missing."""


class ExtractionError(PaperKGError):
    """Technique extraction produced an unusable tree."""


class SearchUnavailableError(PaperKGError):
    """The web-search client could not serve a query."""


class FetchError(PaperKGError):
    """A source or repository fetch failed (retryable)."""


class PipelineError(PaperKGError):
    """A build stage failed; carries the stage name for resumption."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
