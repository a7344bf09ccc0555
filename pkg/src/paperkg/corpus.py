"""Corpus curation: pick which related papers join the graph.

Candidates come from two channels: the target paper's bibliography
(scored for centrality, top slice kept) and keyword search on the
target's technique names. Each candidate must then resolve to fetchable
source and a confirmed, non-blacklisted official repository.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable
from urllib.parse import urlsplit, urlunsplit

from .errors import FetchError, SearchUnavailableError
from .latex import LatexBundle, find_github_urls
from .llm.gateway import LLMGateway
from .llm.templates import NONE_ANSWER

logger = logging.getLogger(__name__)

_README_NAMES = ("README.md", "README.rst", "README.txt", "README", "readme.md")
_MAX_REPO_CANDIDATES = 3


def normalize_repo_url(url: str) -> str:
    """Canonical form for repository comparison: lowercased scheme and
    host, no query, fragment, trailing slash, or .git suffix."""
    parts = urlsplit(url.strip())
    path = parts.path.rstrip("/")
    if path.endswith(".git"):
        path = path[: -len(".git")]
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, "", ""))


def title_key(title: str) -> str:
    return re.sub(r"\s+", " ", title).strip().casefold()


class Blacklist:
    """Repositories that must never count as an official implementation."""

    def __init__(self, urls: list[str] | None = None):
        self._urls = {normalize_repo_url(u) for u in (urls or [])}

    @classmethod
    def from_file(cls, path: str | Path) -> "Blacklist":
        path = Path(path)
        if not path.is_file():
            return cls([])
        urls = []
        for line in path.read_text("utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                urls.append(line)
        return cls(urls)

    def __contains__(self, url: str) -> bool:
        return normalize_repo_url(url) in self._urls

    def __len__(self) -> int:
        return len(self._urls)


@dataclass
class CandidatePaper:
    title: str
    origin: str  # "reference" or "search"
    arxiv_id: str | None = None
    abstract: str = ""
    repo_hint: str | None = None
    score: float | None = None


@dataclass(frozen=True)
class ArxivRecord:
    arxiv_id: str
    title: str
    abstract: str


@dataclass(frozen=True)
class SearchHit:
    title: str
    arxiv_id: str | None = None
    url: str | None = None


@runtime_checkable
class ArxivClient(Protocol):
    def lookup_title(self, title: str) -> ArxivRecord | None: ...

    def get_record(self, arxiv_id: str) -> ArxivRecord | None: ...

    def fetch_source(self, arxiv_id: str) -> LatexBundle | None: ...


@runtime_checkable
class SearchClient(Protocol):
    def search(self, query: str) -> list[SearchHit]: ...


@runtime_checkable
class RepoClient(Protocol):
    def fetch_repo(self, url: str) -> dict[str, str] | None: ...


@dataclass
class ResolvedPaper:
    candidate: CandidatePaper
    arxiv_id: str
    title: str
    abstract: str
    bundle: LatexBundle
    repo_url: str | None = None
    repo_files: dict[str, str] = field(default_factory=dict)


def extract_references(gateway: LLMGateway, bibliography: str) -> list[str]:
    """Cited titles recovered from compiled bibliography text.

    Empty input short-circuits to an empty list without a chat call.
    Duplicate titles (case- and whitespace-insensitive) keep their first
    occurrence only.
    """
    if not bibliography.strip():
        return []
    reply = gateway.chat("bbl_references", {"bibliography": bibliography}, role="paper")
    if reply is NONE_ANSWER:
        return []
    seen: set[str] = set()
    titles = []
    for title in reply:
        key = title_key(title)
        if key and key not in seen:
            seen.add(key)
            titles.append(title.strip())
    return titles


def rank_references(
    gateway: LLMGateway,
    title: str,
    abstract: str,
    references: list[str],
    k: int,
) -> list[CandidatePaper]:
    """Score each cited title for centrality and keep the top slice.

    Ordering is (score descending, title ascending) so equal scores
    stay deterministic.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    scored = []
    for ref in references:
        score = gateway.chat(
            "reference_scoring",
            {"title": title, "abstract": abstract, "reference": ref},
        )
        scored.append(CandidatePaper(title=ref, origin="reference", score=float(score)))
    scored.sort(key=lambda c: (-(c.score or 0.0), c.title))
    return scored[: min(k, len(scored))]


def retrieve_by_technique(
    search_client: SearchClient,
    keywords: list[str],
    existing_titles: list[str],
) -> list[CandidatePaper]:
    """Search candidates by technique keyword, skipping known titles.

    An unavailable search backend degrades to no candidates with a
    warning; an empty keyword list is a caller bug.
    """
    if not keywords:
        raise ValueError("keywords must be non-empty")
    seen = {title_key(t) for t in existing_titles}
    out = []
    for keyword in keywords:
        try:
            hits = search_client.search(keyword)
        except SearchUnavailableError as exc:
            logger.warning("technique search unavailable (%s); continuing without it", exc)
            return out
        for hit in hits:
            key = title_key(hit.title)
            if key in seen:
                continue
            seen.add(key)
            out.append(
                CandidatePaper(
                    title=hit.title,
                    origin="search",
                    arxiv_id=hit.arxiv_id,
                    repo_hint=hit.url,
                )
            )
    return out


def _find_readme(files: dict[str, str]) -> str:
    for name in _README_NAMES:
        if name in files:
            return files[name]
    for path, content in sorted(files.items()):
        if Path(path).name.lower().startswith("readme"):
            return content
    return ""


def discover_repo(
    resolved_title: str,
    abstract: str,
    bundle: LatexBundle,
    repo_hint: str | None,
    repo_client: RepoClient,
    gateway: LLMGateway | None,
) -> tuple[str | None, dict[str, str]]:
    """Find the official repository for a paper.

    Candidate URLs are the search hint plus repository links inside the
    source, tried in order; a candidate counts only if its README is
    judged to belong to this paper (skipped when no gateway is given).
    """
    candidates: list[str] = []
    if repo_hint:
        candidates.append(repo_hint)
    source_text = "\n".join(bundle.files.values())
    for url in find_github_urls(source_text):
        if normalize_repo_url(url) not in {normalize_repo_url(c) for c in candidates}:
            candidates.append(url)
    for url in candidates[:_MAX_REPO_CANDIDATES]:
        try:
            files = repo_client.fetch_repo(url)
        except FetchError as exc:
            logger.warning("cannot fetch %s: %s", url, exc)
            continue
        if files is None:
            continue
        if gateway is not None:
            confirmed = gateway.chat(
                "associated_paper",
                {"title": resolved_title, "abstract": abstract, "readme": _find_readme(files)},
            )
            if not confirmed:
                logger.info("repo %s rejected as unrelated to %r", url, resolved_title)
                continue
        return normalize_repo_url(url), files
    return None, {}


def resolve_sources(
    candidates: list[CandidatePaper],
    arxiv_client: ArxivClient,
    repo_client: RepoClient,
    gateway: LLMGateway | None = None,
) -> tuple[list[ResolvedPaper], list[str]]:
    """Resolve candidates to (record, source bundle, repository).

    Candidates without a listing or without fetchable source drop out;
    every drop is recorded in the returned error list so curation stays
    auditable.
    """
    resolved = []
    errors = []
    for cand in candidates:
        try:
            if cand.arxiv_id:
                record = arxiv_client.get_record(cand.arxiv_id)
            else:
                record = arxiv_client.lookup_title(cand.title)
        except FetchError as exc:
            errors.append(f"{cand.title}: lookup failed: {exc}")
            continue
        if record is None:
            errors.append(f"{cand.title}: no listing found")
            continue
        try:
            bundle = arxiv_client.fetch_source(record.arxiv_id)
        except FetchError as exc:
            errors.append(f"{cand.title}: source fetch failed: {exc}")
            continue
        if bundle is None:
            errors.append(f"{cand.title}: no source available")
            continue
        repo_url, repo_files = discover_repo(
            record.title, record.abstract, bundle, cand.repo_hint, repo_client, gateway
        )
        resolved.append(
            ResolvedPaper(
                candidate=cand,
                arxiv_id=record.arxiv_id,
                title=record.title,
                abstract=record.abstract,
                bundle=bundle,
                repo_url=repo_url,
                repo_files=repo_files,
            )
        )
    return resolved, errors


def filter_official(
    resolved: list[ResolvedPaper],
    blacklist: Blacklist,
) -> tuple[list[ResolvedPaper], list[str]]:
    """Keep papers with a confirmed official repo that is not blacklisted."""
    kept = []
    dropped = []
    for paper in resolved:
        if paper.repo_url is None:
            dropped.append(f"{paper.title}: no official repository found")
        elif paper.repo_url in blacklist:
            dropped.append(f"{paper.title}: repository {paper.repo_url} is blacklisted")
        else:
            kept.append(paper)
    return kept, dropped


def write_corpus_manifest(
    path: str | Path,
    target: dict,
    papers: list[dict],
    dropped: list[str],
) -> None:
    """Record what was curated and why the rest fell away."""
    doc = {
        "schema_version": 1,
        "target": target,
        "papers": papers,
        "dropped": sorted(dropped),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n", "utf-8")
