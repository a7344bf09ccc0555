"""Offline environment backed by an on-disk fixture directory.

Layout expected under the fixture root:

    target/            LaTeX source of the paper to build around
    arxiv/index.json   listing records: id -> {title, abstract, source}
    repos/index.json   repo url -> directory with its files, or null
    search.json        keyword -> list of {title, arxiv_id, url}
    stub_chat.yaml     match rules for the deterministic chat stub
    blacklist.txt      repository urls that never count as official
    config.yaml        build configuration (optional)

Everything resolves locally, so builds are reproducible and runnable
with no network or credentials.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import yaml

from .config import Config, default_config, load_config
from .corpus import ArxivRecord, Blacklist, SearchHit, normalize_repo_url, title_key
from .errors import ConfigError, SearchUnavailableError, StorageError
from .latex import LatexBundle
from .llm.gateway import LLMGateway, LLMProfile, RateLimiter
from .llm.provider import StubChatProvider, StubRule
from .pipeline import Environment

logger = logging.getLogger(__name__)

TARGET_DIR_NAME = "target"


def _read_json(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise StorageError(f"cannot read fixture index {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise StorageError(f"fixture index {path} must be a JSON object")
    return doc


class FixtureArxivClient:
    """Paper listing and source fetch served from arxiv/index.json."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        index_path = self.root / "arxiv" / "index.json"
        self.index = _read_json(index_path) if index_path.is_file() else {}
        self._by_title = {title_key(rec["title"]): aid for aid, rec in self.index.items()}

    def get_record(self, arxiv_id: str) -> ArxivRecord | None:
        rec = self.index.get(arxiv_id)
        if rec is None:
            return None
        return ArxivRecord(arxiv_id=arxiv_id, title=rec["title"], abstract=rec.get("abstract", ""))

    def lookup_title(self, title: str) -> ArxivRecord | None:
        aid = self._by_title.get(title_key(title))
        return self.get_record(aid) if aid else None

    def fetch_source(self, arxiv_id: str) -> LatexBundle | None:
        rec = self.index.get(arxiv_id)
        if rec is None or not rec.get("source"):
            return None
        return LatexBundle.from_directory(self.root / rec["source"])


class FixtureSearchClient:
    """Keyword search served from search.json; missing file means the
    search backend is down, matching the degraded-mode contract."""

    def __init__(self, root: str | Path):
        self.path = Path(root) / "search.json"

    def search(self, query: str) -> list[SearchHit]:
        if not self.path.is_file():
            raise SearchUnavailableError(f"no search fixture at {self.path}")
        doc = _read_json(self.path)
        hits = []
        for raw in doc.get(query, []):
            hits.append(
                SearchHit(
                    title=raw["title"],
                    arxiv_id=raw.get("arxiv_id"),
                    url=raw.get("url"),
                )
            )
        return hits


class FixtureRepoClient:
    """Repository fetch served from repos/index.json plus directories."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        index_path = self.root / "repos" / "index.json"
        raw = _read_json(index_path) if index_path.is_file() else {}
        self.index = {normalize_repo_url(url): rel for url, rel in raw.items()}

    def fetch_repo(self, url: str) -> dict[str, str] | None:
        rel = self.index.get(normalize_repo_url(url))
        if rel is None:
            return None
        repo_dir = self.root / rel
        files = {}
        for path in sorted(repo_dir.rglob("*")):
            if path.is_file():
                files[path.relative_to(repo_dir).as_posix()] = path.read_text(
                    "utf-8", errors="replace"
                )
        return files


def load_stub_rules(path: str | Path) -> list[StubRule]:
    path = Path(path)
    if not path.is_file():
        return []
    try:
        doc = yaml.safe_load(path.read_text("utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid stub rules YAML in {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("rules", []), list):
        raise ConfigError(f"stub rules file {path} must contain a 'rules' list")
    rules = []
    for i, raw in enumerate(doc.get("rules", [])):
        if not isinstance(raw, dict) or "contains" not in raw or "response" not in raw:
            raise ConfigError(f"stub rule #{i} in {path} needs 'contains' and 'response'")
        rules.append(
            StubRule(
                contains=str(raw["contains"]),
                response=str(raw["response"]),
                template_id=raw.get("template_id"),
            )
        )
    return rules


def fixture_config(root: str | Path) -> Config:
    path = Path(root) / "config.yaml"
    return load_config(path) if path.is_file() else default_config()


def fixture_blacklist(root: str | Path) -> Blacklist:
    return Blacklist.from_file(Path(root) / "blacklist.txt")


def fixture_target(root: str | Path) -> Path:
    return Path(root) / TARGET_DIR_NAME


def build_fixture_environment(root: str | Path, cfg: Config) -> Environment:
    """Wire a fully offline Environment from a fixture directory."""
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"fixture directory not found: {root}")
    chat = StubChatProvider(load_stub_rules(root / "stub_chat.yaml"))
    profile = LLMProfile(
        model=cfg.global_.model,
        paper_model=cfg.global_.paper_model,
        code_model=cfg.global_.code_model,
    )
    limiter = (
        RateLimiter(cfg.global_.requests_per_minute)
        if cfg.global_.requests_per_minute is not None
        else None
    )
    gateway = LLMGateway(
        chat,
        profile=profile,
        max_retries=cfg.global_.max_retries,
        rate_limiter=limiter,
    )
    env = Environment(
        gateway=gateway,
        arxiv=FixtureArxivClient(root),
        repo=FixtureRepoClient(root),
        search=FixtureSearchClient(root),
    )
    gateway.embedding_provider = env.embedder(cfg.retrieve.embed_model)
    return env
