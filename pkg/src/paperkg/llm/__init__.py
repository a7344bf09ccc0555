"""Chat and embedding access: prompt templates, providers, and the gateway."""

from .gateway import LLMGateway, LLMProfile, RateLimiter
from .provider import (
    ChatProvider,
    ChatRequest,
    EmbeddingProvider,
    HashingEmbeddingProvider,
    HTTPChatProvider,
    StubChatProvider,
    StubRule,
    TableEmbeddingProvider,
)
from .templates import (
    PIPELINE_CONTRACTS,
    TEMPLATES,
    NONE_ANSWER,
    PromptTemplate,
    fenced_blocks,
    render_template,
)

__all__ = [
    "ChatProvider",
    "ChatRequest",
    "EmbeddingProvider",
    "HTTPChatProvider",
    "HashingEmbeddingProvider",
    "LLMGateway",
    "LLMProfile",
    "NONE_ANSWER",
    "PIPELINE_CONTRACTS",
    "PromptTemplate",
    "RateLimiter",
    "StubChatProvider",
    "StubRule",
    "TEMPLATES",
    "TableEmbeddingProvider",
    "fenced_blocks",
    "render_template",
]
