"""Code synthesis: locate supporting snippets, generate self-testing
scripts, verify them, and repair failures in a bounded debug loop.

Every generated script carries its own test section after a marker
line, so the whole artifact can be executed as-is to check itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .config import CodeConfig
from .errors import ContractViolationError, ProviderError
from .llm.gateway import LLMGateway
from .llm.provider import EmbeddingProvider
from .llm.templates import NONE_ANSWER
from .rag import VectorIndex, merge_results_by_file, query_index
from .sandbox import SandboxLimits, SandboxResult, run_sandbox

logger = logging.getLogger(__name__)

TEST_MARKER = "# TEST BLOCK"

_EXCERPT_CHARS = 240
_ERROR_TAIL_CHARS = 2000
_TRUNCATION_NOTE = "\n# [elided: truncated to fit the prompt budget]\n"


@dataclass
class SnippetBundle:
    """Files chosen to support one synthesis call, plus the rendered payload."""

    files: list[str] = field(default_factory=list)
    payload: str = ""
    elided_files: int = 0


@dataclass
class SynthesisResult:
    implementation: str
    test_script: str
    documentation: str


@dataclass
class DebugOutcome:
    script: str
    executable: bool
    iterations: int
    history: list[tuple[SandboxResult, str]] = field(default_factory=list)


def split_script(script: str) -> tuple[str, str]:
    """(implementation, full script): implementation is everything above
    the marker line; the full script stays runnable with its tests."""
    lines = script.splitlines()
    for i, line in enumerate(lines):
        if line.strip() == TEST_MARKER:
            return "\n".join(lines[:i]).rstrip(), script
    logger.warning("script has no %r line; treating the whole script as implementation", TEST_MARKER)
    return script.rstrip(), script


def sandbox_limits_from_config(cfg: CodeConfig) -> SandboxLimits:
    sb = cfg.sandbox
    return SandboxLimits(
        timeout_seconds=sb.timeout_seconds,
        grace_seconds=sb.grace_seconds,
        stream_cap_bytes=sb.stream_cap_bytes,
        allow_network=sb.allow_network,
        interpreter=sb.interpreter,
    )


def build_code_payload(files: dict[str, str], selection: list[str], max_bytes: int) -> SnippetBundle:
    """Concatenate selected files under per-file headers, within a byte
    budget. A file that does not fit is cut with a visible note; files
    that get no room at all are counted as elided."""
    if max_bytes <= 0:
        raise ValueError(f"max_bytes must be positive, got {max_bytes}")
    parts: list[str] = []
    included: list[str] = []
    used = 0
    elided = 0
    for pos, path in enumerate(selection):
        header = f"### {path}\n"
        chunk = header + files.get(path, "") + "\n"
        size = len(chunk.encode("utf-8"))
        if used + size <= max_bytes:
            parts.append(chunk)
            included.append(path)
            used += size
            continue
        note_size = len((header + _TRUNCATION_NOTE).encode("utf-8"))
        remaining = max_bytes - used
        if remaining > note_size:
            body = files.get(path, "").encode("utf-8")[: remaining - note_size]
            parts.append(header + body.decode("utf-8", errors="ignore") + _TRUNCATION_NOTE)
            included.append(path)
            used = max_bytes
            elided += len(selection) - pos - 1
        else:
            elided += len(selection) - pos
        break
    return SnippetBundle(files=included, payload="".join(parts), elided_files=elided)


def locate_snippets(
    technique_text: str,
    files: dict[str, str],
    index: VectorIndex,
    embed_provider: EmbeddingProvider,
    gateway: LLMGateway,
    cfg: CodeConfig,
) -> SnippetBundle:
    """Find the repository files most useful for implementing a technique.

    Chunk-level search proposes candidate files; the chat model picks at
    most ``top_files`` of them; the picked files are packed into a
    byte-capped payload. When the model declines or picks nothing valid,
    the embedding ranking stands.
    """
    if not index.chunks:
        return SnippetBundle()
    query_vec = embed_provider.embed([technique_text])[0]
    hits = query_index(index, query_vec, cfg.top_k)
    grouped = merge_results_by_file(hits)
    ranked_files = [path for path in grouped if path]
    if not ranked_files:
        return SnippetBundle()

    listing_lines = []
    for path in ranked_files:
        excerpt = grouped[path][0].chunk.text[:_EXCERPT_CHARS].replace("\n", " ")
        listing_lines.append(f"{path}: {excerpt}")
    try:
        choice = gateway.chat(
            "relevant_code_files",
            {
                "technique": technique_text,
                "candidates": "\n".join(listing_lines),
                "max_files": cfg.top_files,
            },
            role="code",
        )
    except (ProviderError, ContractViolationError) as exc:
        logger.warning("file selection failed (%s); falling back to embedding order", exc)
        choice = NONE_ANSWER

    if choice is NONE_ANSWER:
        selection = ranked_files[: cfg.top_files]
    else:
        selection = []
        for path in choice:
            if path in grouped and path not in selection:
                selection.append(path)
            elif path not in grouped:
                logger.warning("model selected unknown file %r; dropping it", path)
        selection = selection[: cfg.top_files] or ranked_files[: cfg.top_files]
    return build_code_payload(files, selection, cfg.max_prompt_code_bytes)


def synthesize_leaf(gateway: LLMGateway, technique_text: str, snippets: str) -> SynthesisResult:
    """Generate a self-testing script for a leaf technique from repo excerpts."""
    script, docs = gateway.chat(
        "rewrite_code_leaf",
        {"technique": technique_text, "snippets": snippets},
        role="code",
    )
    implementation, test_script = split_script(script)
    return SynthesisResult(implementation=implementation, test_script=test_script, documentation=docs)


def synthesize_composite(gateway: LLMGateway, technique_text: str, child_blocks: str) -> SynthesisResult:
    """Generate a script for a parent technique from its children's scripts."""
    script, docs = gateway.chat(
        "rewrite_code_composite",
        {"technique": technique_text, "children": child_blocks},
        role="code",
    )
    implementation, test_script = split_script(script)
    return SynthesisResult(implementation=implementation, test_script=test_script, documentation=docs)


def verify_code(gateway: LLMGateway, technique_text: str, script: str) -> bool:
    """Model judgment on whether the script realizes the technique.

    Any provider or contract failure counts as not verified; the
    pipeline then drops the candidate rather than storing doubt."""
    try:
        return gateway.chat("verify_code", {"technique": technique_text, "code": script})
    except (ProviderError, ContractViolationError) as exc:
        logger.warning("verification call failed, treating as not verified: %s", exc)
        return False


def _failure_text(result: SandboxResult) -> str:
    parts = []
    if result.timed_out:
        parts.append("The run exceeded the time limit and was killed.")
    if result.stderr.strip():
        parts.append(result.stderr[-_ERROR_TAIL_CHARS:])
    if result.stdout.strip() and not result.stderr.strip():
        parts.append(result.stdout[-_ERROR_TAIL_CHARS:])
    return "\n".join(parts) or f"exit status {result.exit_status} with no output"


def self_debug(
    script: str,
    gateway: LLMGateway,
    limits: SandboxLimits,
    max_iters: int = 3,
) -> DebugOutcome:
    """Run the script; on failure, ask for a revision and retry.

    At most ``max_iters`` sandbox runs happen; the iteration count in
    the outcome equals the number of runs. The last revision is kept
    even when it still fails, so the artifact reflects the final state.
    """
    if max_iters <= 0:
        raise ValueError(f"max_iters must be positive, got {max_iters}")
    history: list[tuple[SandboxResult, str]] = []
    current = script
    for attempt in range(1, max_iters + 1):
        result = run_sandbox(current, limits)
        if result.ok:
            history.append((result, f"run {attempt}: passed"))
            return DebugOutcome(script=current, executable=True, iterations=attempt, history=history)
        reason = "timed out" if result.timed_out else f"exit {result.exit_status}"
        history.append((result, f"run {attempt}: {reason}"))
        if attempt == max_iters:
            break
        try:
            current = gateway.chat(
                "code_revision",
                {"code": current, "error": _failure_text(result)},
                role="code",
            )
        except (ProviderError, ContractViolationError) as exc:
            logger.warning("revision call failed, stopping debug loop: %s", exc)
            break
    return DebugOutcome(script=current, executable=False, iterations=len(history), history=history)
