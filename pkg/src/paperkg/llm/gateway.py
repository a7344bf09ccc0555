"""Gateway between pipeline stages and the chat/embedding providers.

Owns the prompt render, the reply parsing, bounded retries with one
corrective reprompt, role-to-model routing, and an optional request
rate cap.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolationError, ProviderError, TemplateError
from ..model import count_tokens
from .provider import ChatProvider, ChatRequest, EmbeddingProvider
from .templates import TEMPLATES, render_template

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "DeepSeek-V3"
DEFAULT_PAPER_MODEL = "o4-mini"
DEFAULT_CODE_MODEL = "o4-mini"

_REPROMPT_SUFFIX = (
    "\n\nYour previous reply could not be parsed: {reason}. "
    "Answer again and follow the required output format exactly."
)


@dataclass(frozen=True)
class LLMProfile:
    """Which model serves which pipeline role."""

    model: str = DEFAULT_MODEL
    paper_model: str = DEFAULT_PAPER_MODEL
    code_model: str = DEFAULT_CODE_MODEL

    def for_role(self, role: str) -> str:
        if role == "paper":
            return self.paper_model
        if role == "code":
            return self.code_model
        return self.model


class RateLimiter:
    """Sliding-window cap on requests per minute.

    Clock and sleep are injectable so tests never actually wait.
    """

    def __init__(self, max_per_minute: int | None, clock=time.monotonic, sleep=time.sleep):
        if max_per_minute is not None and max_per_minute <= 0:
            raise ValueError(f"max_per_minute must be positive or None, got {max_per_minute}")
        self.max_per_minute = max_per_minute
        self.clock = clock
        self.sleep = sleep
        self._stamps: list[float] = []

    def acquire(self) -> None:
        if self.max_per_minute is None:
            return
        now = self.clock()
        self._stamps = [t for t in self._stamps if now - t < 60.0]
        if len(self._stamps) >= self.max_per_minute:
            wait = 60.0 - (now - self._stamps[0])
            if wait > 0:
                logger.debug("rate cap reached, sleeping %.2fs", wait)
                self.sleep(wait)
                now = self.clock()
                self._stamps = [t for t in self._stamps if now - t < 60.0]
        self._stamps.append(self.clock())


class LLMGateway:
    """Single entry point for chat and embedding calls.

    chat() renders the template, calls the provider up to
    ``1 + max_retries`` times, and, if every reply fails its parser,
    reprompts once with the parse failure appended before giving up.
    """

    def __init__(
        self,
        chat_provider: ChatProvider,
        embedding_provider: EmbeddingProvider | None = None,
        profile: LLMProfile | None = None,
        max_retries: int = 2,
        rate_limiter: RateLimiter | None = None,
    ):
        if max_retries < 0:
            raise ValueError(f"max_retries must be nonnegative, got {max_retries}")
        self.chat_provider = chat_provider
        self.embedding_provider = embedding_provider
        self.profile = profile or LLMProfile()
        self.max_retries = max_retries
        self.rate_limiter = rate_limiter
        self.stats = {"requests": 0, "prompt_tokens": 0, "reply_tokens": 0}

    def _call(self, request: ChatRequest) -> str:
        if self.rate_limiter is not None:
            self.rate_limiter.acquire()
        self.stats["requests"] += 1
        self.stats["prompt_tokens"] += count_tokens(request.prompt)
        reply = self.chat_provider.chat(request)
        self.stats["reply_tokens"] += count_tokens(reply)
        return reply

    def chat(self, template_id: str, slots: dict, role: str = "general", model: str | None = None):
        if template_id not in TEMPLATES:
            raise TemplateError(f"unknown template {template_id!r}")
        template = TEMPLATES[template_id]
        prompt = render_template(template, slots)
        chosen = model or self.profile.for_role(role)
        request = ChatRequest(model=chosen, prompt=prompt, template_id=template_id, slots=slots)

        parse_failure: ContractViolationError | None = None
        provider_failure: ProviderError | None = None
        for attempt in range(1 + self.max_retries):
            try:
                return template.parse(self._call(request))
            except ContractViolationError as exc:
                parse_failure = exc
                logger.debug("template %s attempt %d unparseable: %s", template_id, attempt + 1, exc)
            except ProviderError as exc:
                provider_failure = exc
                logger.debug("template %s attempt %d provider error: %s", template_id, attempt + 1, exc)

        if parse_failure is not None:
            # One corrective reprompt, then surface the failure.
            corrective = ChatRequest(
                model=chosen,
                prompt=prompt + _REPROMPT_SUFFIX.format(reason=parse_failure),
                template_id=template_id,
                slots=slots,
            )
            try:
                return template.parse(self._call(corrective))
            except (ContractViolationError, ProviderError) as exc:
                raise ContractViolationError(
                    f"template {template_id}: reply unparseable after "
                    f"{1 + self.max_retries} attempts and one reprompt: {exc}"
                ) from exc
        raise ProviderError(
            f"template {template_id}: provider failed {1 + self.max_retries} times: {provider_failure}"
        )

    def embed_texts(self, texts: list[str], batch_size: int = 64) -> list[np.ndarray]:
        if self.embedding_provider is None:
            raise ProviderError("no embedding provider configured")
        if batch_size <= 0:
            raise ValueError(f"batch_size must be positive, got {batch_size}")
        out: list[np.ndarray] = []
        for i in range(0, len(texts), batch_size):
            batch = texts[i : i + batch_size]
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            out.extend(self.embedding_provider.embed(batch))
        return out
