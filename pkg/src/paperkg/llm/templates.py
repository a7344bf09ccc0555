"""Prompt templates and answer parsers for every chat interaction.

Each template couples an id, the named slots it needs, the instruction
text, and a parser that turns the raw reply into a typed value. Replies
put their machine-readable payload in the last fenced code block, so
parsers read from the end of the text. A reply of ``None`` (where a
template allows it) maps to the NONE_ANSWER sentinel.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from typing import Any, Callable

from ..errors import ContractViolationError, TemplateError


class _NoneAnswer:
    def __repr__(self) -> str:
        return "NONE_ANSWER"


NONE_ANSWER = _NoneAnswer()

_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_SLOT_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


def fenced_blocks(text: str) -> list[str]:
    """All fenced code blocks in the text, in order, fences removed."""
    return [m.group(1).rstrip("\n") for m in _FENCE_RE.finditer(text)]


def _payload(raw: str) -> str:
    """The machine-readable part of a reply: last fenced block, else all of it."""
    blocks = fenced_blocks(raw)
    return blocks[-1].strip() if blocks else raw.strip()


def _literal(text: str) -> Any:
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ContractViolationError(f"reply is not a Python literal: {exc}") from exc


def parse_text(raw: str) -> str:
    text = _payload(raw)
    if not text:
        raise ContractViolationError("reply is empty")
    return text


def parse_optional_text(raw: str):
    text = _payload(raw)
    if text == "None":
        return NONE_ANSWER
    if not text:
        raise ContractViolationError("reply is empty")
    return text


def parse_bool(raw: str) -> bool:
    text = _payload(raw)
    match = re.fullmatch(r"\W*(True|False)\W*", text)
    if not match:
        raise ContractViolationError(f"expected True or False, got {text[:80]!r}")
    return match.group(1) == "True"


def parse_float(raw: str) -> float:
    value = _literal(_payload(raw))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ContractViolationError(f"expected a number, got {type(value).__name__}")
    return float(value)


def parse_string_list(raw: str):
    text = _payload(raw)
    if text == "None":
        return NONE_ANSWER
    value = _literal(text)
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ContractViolationError("expected a list of strings")
    return value


def _check_forest_shape(entries: Any, where: str) -> None:
    if not isinstance(entries, list):
        raise ContractViolationError(f"{where}: expected a list")
    for i, entry in enumerate(entries):
        spot = f"{where}[{i}]"
        if not isinstance(entry, dict):
            raise ContractViolationError(f"{spot}: expected a dict")
        for key in ("name", "category", "definition"):
            if not isinstance(entry.get(key), str):
                raise ContractViolationError(f"{spot}: missing or non-string {key!r}")
        unknown = set(entry) - {"name", "category", "definition", "children"}
        if unknown:
            raise ContractViolationError(f"{spot}: unknown keys {sorted(unknown)}")
        _check_forest_shape(entry.get("children", []), f"{spot}.children")


def parse_forest(raw: str):
    text = _payload(raw)
    if text == "None":
        return NONE_ANSWER
    value = _literal(text)
    _check_forest_shape(value, "forest")
    return value


def parse_code_and_docs(raw: str) -> tuple[str, str]:
    blocks = fenced_blocks(raw)
    if len(blocks) < 2:
        raise ContractViolationError(f"expected two fenced blocks (code, documentation), got {len(blocks)}")
    return blocks[-2].rstrip(), blocks[-1].strip()


def parse_code(raw: str) -> str:
    blocks = fenced_blocks(raw)
    if not blocks:
        raise ContractViolationError("expected a fenced block containing the script")
    return blocks[-1].rstrip()


def parse_names_and_guidance(raw: str) -> tuple[list[str], str]:
    matches = list(_FENCE_RE.finditer(raw))
    if not matches:
        raise ContractViolationError("expected a fenced block with the ranked names")
    value = _literal(matches[-1].group(1).strip())
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ContractViolationError("expected a list of technique names")
    guidance = raw[: matches[-1].start()].strip()
    return value, guidance


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    slots: tuple[str, ...]
    text: str
    parse: Callable[[str], Any]


def render_template(template: PromptTemplate, slots: dict[str, Any]) -> str:
    """Fill the template's placeholders; slot values may contain braces."""
    given = set(slots)
    wanted = set(template.slots)
    if given != wanted:
        missing = sorted(wanted - given)
        extra = sorted(given - wanted)
        parts = []
        if missing:
            parts.append(f"missing slots {missing}")
        if extra:
            parts.append(f"unknown slots {extra}")
        raise TemplateError(f"template {template.id}: " + ", ".join(parts))

    def fill(match: re.Match) -> str:
        return str(slots[match.group(1)])

    return _SLOT_RE.sub(fill, template.text)


_TEMPLATE_DEFS = [
    PromptTemplate(
        id="bbl_references",
        slots=("bibliography",),
        text=(
            "Below is the compiled bibliography of a research paper.\n\n"
            "{bibliography}\n\n"
            "List the titles of the cited works, in the order they appear. "
            "Answer with a single fenced code block containing a Python list of "
            "title strings. If no titles can be recovered, answer None."
        ),
        parse=parse_string_list,
    ),
    PromptTemplate(
        id="paper_contributions",
        slots=("title", "sections", "equations"),
        text=(
            "You are given a research paper titled {title}.\n\n"
            "Sections:\n{sections}\n\n"
            "Display equations, in order of appearance:\n{equations}\n\n"
            "Identify the paper's concrete contributions and organize them as a "
            "forest of entries. Each entry is a dict with keys 'name', "
            "'category', 'definition', and optionally 'children'. The category "
            "must be one of: 'Methodology' for a named multi-part method the "
            "paper introduces; 'Technique' for a single reusable mechanism, "
            "algorithm, or procedure; 'Finding' for an empirical observation or "
            "measured result; 'Resource' for a dataset, benchmark, or released "
            "tool. Only Methodology and Technique entries may have children; "
            "Finding and Resource entries must be leaves. Definitions should be "
            "one to three sentences, self-contained, and precise. Answer with a "
            "single fenced code block containing the Python list literal. If "
            "the text contains no extractable contributions, answer None."
        ),
        parse=parse_forest,
    ),
    PromptTemplate(
        id="repo_overview",
        slots=("file_tree", "readme"),
        text=(
            "You are given the file tree and README of a code repository.\n\n"
            "File tree:\n{file_tree}\n\n"
            "README:\n{readme}\n\n"
            "Write a short overview of what the repository implements and how "
            "the main modules fit together. Plain prose, no code fences."
        ),
        parse=parse_text,
    ),
    PromptTemplate(
        id="associated_paper",
        slots=("title", "abstract", "readme"),
        text=(
            "A paper is titled {title}. Its abstract:\n{abstract}\n\n"
            "A repository README:\n{readme}\n\n"
            "Decide whether this repository is the implementation released for "
            "that paper, rather than an unrelated or third-party project. "
            "Answer with a single fenced code block containing True or False."
        ),
        parse=parse_bool,
    ),
    PromptTemplate(
        id="rewrite_technique",
        slots=("technique", "context"),
        text=(
            "Technique entry:\n{technique}\n\n"
            "Passages from the source paper that mention it:\n{context}\n\n"
            "Rewrite the technique's definition so it is self-contained and "
            "captures any constants, update rules, or constraints stated in "
            "the passages. Keep it under four sentences. Answer with a single "
            "fenced code block containing only the new definition. If the "
            "passages add nothing, answer None."
        ),
        parse=parse_optional_text,
    ),
    PromptTemplate(
        id="relevant_code_files",
        slots=("technique", "candidates", "max_files"),
        text=(
            "Technique to implement:\n{technique}\n\n"
            "Candidate repository files with matching excerpts:\n{candidates}\n\n"
            "Select at most {max_files} files whose content is needed to "
            "implement the technique, most relevant first. Answer with a "
            "single fenced code block containing a Python list of file path "
            "strings drawn from the candidates. If none are relevant, answer "
            "None."
        ),
        parse=parse_string_list,
    ),
    PromptTemplate(
        id="rerank_techniques",
        slots=("task", "techniques"),
        text=(
            "A coding task:\n{task}\n\n"
            "Candidate techniques retrieved for it, one per line as "
            "'name: definition':\n{techniques}\n\n"
            "First explain briefly how the useful candidates apply to the "
            "task. Then answer with a single fenced code block containing a "
            "Python list of the useful candidates' names, best first, drawn "
            "only from the candidates above. Use an empty list if none apply."
        ),
        parse=parse_names_and_guidance,
    ),
    PromptTemplate(
        id="rewrite_code_leaf",
        slots=("technique", "snippets"),
        text=(
            "Technique to implement:\n{technique}\n\n"
            "Supporting source excerpts from the official repository:\n{snippets}\n\n"
            "Write one self-contained Python script that implements the "
            "technique with stdlib plus numpy only. Put the implementation "
            "first, then a line containing exactly '# TEST BLOCK', then a "
            "test harness that exercises the implementation and raises on "
            "failure so the script exits nonzero when broken. Answer with two "
            "fenced code blocks: first the script, second a short usage note "
            "describing what the script demonstrates."
        ),
        parse=parse_code_and_docs,
    ),
    PromptTemplate(
        id="rewrite_code_composite",
        slots=("technique", "children"),
        text=(
            "Composite technique to implement:\n{technique}\n\n"
            "Verified scripts already written for its child techniques, each "
            "introduced by its id:\n{children}\n\n"
            "Write one self-contained Python script that composes the child "
            "implementations into the parent technique, inlining what it "
            "needs, with stdlib plus numpy only. Put the implementation "
            "first, then a line containing exactly '# TEST BLOCK', then a "
            "test harness that raises on failure. Answer with two fenced "
            "code blocks: first the script, second a short usage note."
        ),
        parse=parse_code_and_docs,
    ),
    PromptTemplate(
        id="verify_code",
        slots=("technique", "code"),
        text=(
            "Technique:\n{technique}\n\n"
            "Candidate script:\n{code}\n\n"
            "Decide whether the script is a faithful realization of the "
            "technique: the core mechanism matches the definition, the test "
            "section actually exercises it, and nothing essential is stubbed "
            "out. Answer with a single fenced code block containing True or "
            "False."
        ),
        parse=parse_bool,
    ),
    PromptTemplate(
        id="decompose_task",
        slots=("task", "overview"),
        text=(
            "A coding task:\n{task}\n\n"
            "Knowledge available to help, summarized:\n{overview}\n\n"
            "Break the task into the smallest sequence of concrete subtasks "
            "that together complete it, each one sentence. Answer with a "
            "single fenced code block containing a Python list of subtask "
            "strings. If the task is already atomic, answer None."
        ),
        parse=parse_string_list,
    ),
    PromptTemplate(
        id="reference_scoring",
        slots=("title", "abstract", "reference"),
        text=(
            "A paper is titled {title}. Its abstract:\n{abstract}\n\n"
            "One of its cited works is titled:\n{reference}\n\n"
            "Score how central the cited work is to the paper's method on a "
            "0.0 to 1.0 scale, where 1.0 means the method directly builds on "
            "it and 0.0 means it is background only. Answer with a single "
            "fenced code block containing the number."
        ),
        parse=parse_float,
    ),
    PromptTemplate(
        id="code_revision",
        slots=("code", "error"),
        text=(
            "The following script failed when executed.\n\n"
            "Script:\n{code}\n\n"
            "Captured failure output:\n{error}\n\n"
            "Fix the defect while preserving the script's structure, "
            "including the '# TEST BLOCK' line and the test section. Answer "
            "with a single fenced code block containing the full revised "
            "script."
        ),
        parse=parse_code,
    ),
]

TEMPLATES: dict[str, PromptTemplate] = {t.id: t for t in _TEMPLATE_DEFS}

# Contracts exercised by the build and query pipelines themselves; the
# remaining templates support auxiliary scoring and repair steps.
PIPELINE_CONTRACTS: tuple[str, ...] = (
    "bbl_references",
    "paper_contributions",
    "repo_overview",
    "associated_paper",
    "rewrite_technique",
    "relevant_code_files",
    "rerank_techniques",
    "rewrite_code_leaf",
    "rewrite_code_composite",
    "verify_code",
    "decompose_task",
)
