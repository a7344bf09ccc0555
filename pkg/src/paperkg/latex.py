"""LaTeX source handling: bundles, comment stripping, sectioning,
equation and URL extraction.

Parsing is deliberately shallow. The goal is to recover section prose,
display equations, bibliography text, and repository links from real
arXiv source trees, not to implement TeX.
"""

from __future__ import annotations

import logging
import re
import tarfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ExtractionError

logger = logging.getLogger(__name__)

TEXT_SUFFIXES = {".tex", ".bbl", ".bib", ".sty", ".cls", ".txt", ".md"}

_COMMENT_RE = re.compile(r"(?<!\\)%.*$", re.MULTILINE)
_INPUT_RE = re.compile(r"\\(?:input|include)\{([^{}]+)\}")
_SECTION_RE = re.compile(r"\\section\*?\{")
_GITHUB_RE = re.compile(r"https?://github\.com/[A-Za-z0-9_.-]+/[A-Za-z0-9_.-]+")

_DISPLAY_ENVS = ("equation", "align", "gather", "multline", "eqnarray")
_ENV_RE = re.compile(
    r"\\begin\{(" + "|".join(e + r"\*?" for e in _DISPLAY_ENVS) + r")\}(.*?)\\end\{\1\}",
    re.DOTALL,
)
_BRACKET_MATH_RE = re.compile(r"(?<!\\)\\\[(.*?)(?<!\\)\\\]", re.DOTALL)


@dataclass
class Section:
    title: str
    text: str


@dataclass
class LatexBundle:
    """A paper's source tree as a path-to-content mapping."""

    files: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_directory(cls, path: str | Path) -> "LatexBundle":
        root = Path(path)
        if not root.is_dir():
            raise ExtractionError(f"not a directory: {root}")
        files = {}
        for file_path in sorted(root.rglob("*")):
            if file_path.is_file() and file_path.suffix.lower() in TEXT_SUFFIXES:
                rel = file_path.relative_to(root).as_posix()
                files[rel] = file_path.read_text("utf-8", errors="replace")
        return cls(files=files)

    @classmethod
    def from_tarball(cls, path: str | Path) -> "LatexBundle":
        path = Path(path)
        files = {}
        try:
            with tarfile.open(path, "r:*") as tar:
                for member in tar.getmembers():
                    if not member.isfile():
                        continue
                    name = Path(member.name)
                    # refuse traversal outside the archive root
                    if name.is_absolute() or ".." in name.parts:
                        raise ExtractionError(f"unsafe tar member path: {member.name}")
                    if name.suffix.lower() not in TEXT_SUFFIXES:
                        continue
                    handle = tar.extractfile(member)
                    if handle is None:
                        continue
                    files[name.as_posix()] = handle.read().decode("utf-8", errors="replace")
        except tarfile.TarError as exc:
            raise ExtractionError(f"cannot read tarball {path}: {exc}") from exc
        return cls(files=files)

    def main_file(self) -> str:
        """The compile entry point, identified by its document class line."""
        candidates = [p for p, text in self.files.items() if "\\documentclass" in text]
        if not candidates:
            raise ExtractionError("no file declares a document class")
        with_body = [p for p in candidates if "\\begin{document}" in self.files[p]]
        pool = with_body or candidates
        return sorted(pool, key=lambda p: (p.count("/"), p))[0]

    def bbl_text(self) -> str:
        """Concatenated compiled-bibliography text, empty if none shipped."""
        parts = [self.files[p] for p in sorted(self.files) if p.lower().endswith(".bbl")]
        return "\n".join(parts)


def strip_comments(text: str) -> str:
    """Drop unescaped line comments; escaped percent signs survive."""
    return _COMMENT_RE.sub("", text)


def expand_inputs(bundle: LatexBundle, text: str, _seen: frozenset[str] = frozenset()) -> str:
    """Inline input/include directives recursively; cycles expand once."""

    def resolve(name: str) -> str | None:
        name = name.strip()
        for candidate in (name, name + ".tex"):
            if candidate in bundle.files:
                return candidate
        return None

    def replace(match: re.Match) -> str:
        target = resolve(match.group(1))
        if target is None or target in _seen:
            return ""
        return expand_inputs(bundle, strip_comments(bundle.files[target]), _seen | {target})

    return _INPUT_RE.sub(replace, text)


def _brace_argument(text: str, open_pos: int) -> tuple[str, int]:
    """The balanced {...} group starting at open_pos; returns (body, end)."""
    depth = 0
    for i in range(open_pos, len(text)):
        if text[i] == "{" and (i == 0 or text[i - 1] != "\\"):
            depth += 1
        elif text[i] == "}" and text[i - 1] != "\\":
            depth -= 1
            if depth == 0:
                return text[open_pos + 1 : i], i + 1
    raise ExtractionError("unbalanced braces in LaTeX source")


def split_sections(text: str) -> list[Section]:
    """Top-level sections in order; material before the first one gets an
    empty title. Subsections stay inside their parent's text."""
    matches = list(_SECTION_RE.finditer(text))
    if not matches:
        return [Section(title="", text=text.strip())] if text.strip() else []
    sections = []
    preamble = text[: matches[0].start()].strip()
    if preamble:
        sections.append(Section(title="", text=preamble))
    for i, match in enumerate(matches):
        title, body_start = _brace_argument(text, match.end() - 1)
        body_end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        sections.append(Section(title=title.strip(), text=text[body_start:body_end].strip()))
    return sections


def extract_equations(text: str) -> list[str]:
    """Display-math bodies in document order, trimmed."""
    found = []
    for match in _ENV_RE.finditer(text):
        found.append((match.start(), match.group(2).strip()))
    for match in _BRACKET_MATH_RE.finditer(text):
        found.append((match.start(), match.group(1).strip()))
    found.sort(key=lambda pair: pair[0])
    return [body for _, body in found if body]


def find_github_urls(text: str) -> list[str]:
    """Ordered, de-duplicated repository links found in the text."""
    seen = []
    for match in _GITHUB_RE.finditer(text):
        url = match.group(0).rstrip(".,;:)")
        if url.endswith(".git"):
            url = url[: -len(".git")]
        if url not in seen:
            seen.append(url)
    return seen


def extract_title(text: str) -> str | None:
    pos = text.find("\\title")
    while pos >= 0:
        brace = text.find("{", pos)
        if brace < 0:
            return None
        try:
            title, _ = _brace_argument(text, brace)
        except ExtractionError:
            return None
        title = re.sub(r"\s+", " ", strip_comments(title)).strip()
        if title:
            return title
        pos = text.find("\\title", pos + 1)
    return None


def extract_abstract(text: str) -> str | None:
    match = re.search(r"\\begin\{abstract\}(.*?)\\end\{abstract\}", text, re.DOTALL)
    if not match:
        return None
    return re.sub(r"\s+", " ", match.group(1)).strip() or None
