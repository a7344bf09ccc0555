"""Build and query configuration.

YAML with four sections: ``code`` (repository indexing and synthesis),
``paper`` (paper-text indexing and enrichment), ``retrieve`` (two-stage
retrieval), and ``global`` (models, paths, logging). Unknown keys are
rejected by their dotted path so typos fail loudly, and a load/save
round trip preserves every value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

logger = logging.getLogger(__name__)

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class SandboxConfig:
    timeout_seconds: float = 60.0
    grace_seconds: float = 2.0
    stream_cap_bytes: int = 65536
    allow_network: bool = False
    interpreter: str | None = None


@dataclass
class CodeConfig:
    embed_model: str = "all-MiniLM-L6-v2"
    chunk_size: int = 350
    chunk_overlap: int = 100
    top_k: int = 10
    top_files: int = 5
    max_prompt_code_bytes: int = 52100
    exec_check_code: bool = True
    max_debug_iters: int = 3
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)


@dataclass
class PaperRetrieverConfig:
    min_similarity: float = 0.1


@dataclass
class PaperConfig:
    embed_model: str = "all-MiniLM-L6-v2"
    chunk_size: int = 350
    chunk_overlap: int = 100
    top_k: int = 5
    retriever: PaperRetrieverConfig = field(default_factory=PaperRetrieverConfig)


@dataclass
class RetrieveConfig:
    embed_model: str = "all-MiniLM-L6-v2"
    technique_similarity: float = 0.6
    paper_similarity: float = 0.6
    max_hits: int = 10
    filter_by_paper: bool = False


@dataclass
class GlobalConfig:
    log_level: str = "DEBUG"
    kg_path: str = "storage/kg"
    model: str = "DeepSeek-V3"
    paper_model: str = "o4-mini"
    code_model: str = "o4-mini"
    max_retries: int = 2
    requests_per_minute: int | None = None
    top_refs: int = 5
    fixtures_path: str | None = None


@dataclass
class Config:
    code: CodeConfig = field(default_factory=CodeConfig)
    paper: PaperConfig = field(default_factory=PaperConfig)
    retrieve: RetrieveConfig = field(default_factory=RetrieveConfig)
    # YAML section name is "global"; that is a keyword, hence the underscore.
    global_: GlobalConfig = field(default_factory=GlobalConfig)


def _require_mapping(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section {where} must be a mapping, got {type(value).__name__}")
    return value


def _take(mapping: dict, key: str, where: str, kinds, default):
    if key not in mapping:
        return default
    value = mapping.pop(key)
    if value is None and type(None) in (kinds if isinstance(kinds, tuple) else (kinds,)):
        return None
    if isinstance(value, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ConfigError(f"{where}.{key} must not be a boolean")
    if not isinstance(value, kinds):
        kind_names = (
            "/".join(k.__name__ for k in kinds) if isinstance(kinds, tuple) else kinds.__name__
        )
        raise ConfigError(f"{where}.{key} must be {kind_names}, got {type(value).__name__}")
    return value


def _reject_unknown(mapping: dict, where: str) -> None:
    if mapping:
        key = sorted(mapping)[0]
        raise ConfigError(f"unknown config key {where}.{key}")


def _parse_sandbox(raw: dict, where: str) -> SandboxConfig:
    d = SandboxConfig()
    cfg = SandboxConfig(
        timeout_seconds=float(_take(raw, "timeout_seconds", where, (int, float), d.timeout_seconds)),
        grace_seconds=float(_take(raw, "grace_seconds", where, (int, float), d.grace_seconds)),
        stream_cap_bytes=_take(raw, "stream_cap_bytes", where, int, d.stream_cap_bytes),
        allow_network=_take(raw, "allow_network", where, bool, d.allow_network),
        interpreter=_take(raw, "interpreter", where, (str, type(None)), d.interpreter),
    )
    _reject_unknown(raw, where)
    if cfg.timeout_seconds <= 0:
        raise ConfigError(f"{where}.timeout_seconds must be positive")
    if cfg.grace_seconds < 0:
        raise ConfigError(f"{where}.grace_seconds must be nonnegative")
    if cfg.stream_cap_bytes <= 0:
        raise ConfigError(f"{where}.stream_cap_bytes must be positive")
    return cfg


def _check_chunking(chunk_size: int, chunk_overlap: int, where: str) -> None:
    if chunk_size <= 0:
        raise ConfigError(f"{where}.chunk_size must be positive")
    if not 0 <= chunk_overlap < chunk_size:
        raise ConfigError(f"{where}.chunk_overlap must be in [0, chunk_size)")


def _parse_code(raw: dict) -> CodeConfig:
    d = CodeConfig()
    cfg = CodeConfig(
        embed_model=_take(raw, "embed_model", "code", str, d.embed_model),
        chunk_size=_take(raw, "chunk_size", "code", int, d.chunk_size),
        chunk_overlap=_take(raw, "chunk_overlap", "code", int, d.chunk_overlap),
        top_k=_take(raw, "top_k", "code", int, d.top_k),
        top_files=_take(raw, "top_files", "code", int, d.top_files),
        max_prompt_code_bytes=_take(raw, "max_prompt_code_bytes", "code", int, d.max_prompt_code_bytes),
        exec_check_code=_take(raw, "exec_check_code", "code", bool, d.exec_check_code),
        max_debug_iters=_take(raw, "max_debug_iters", "code", int, d.max_debug_iters),
        sandbox=_parse_sandbox(_require_mapping(raw.pop("sandbox", None), "code.sandbox"), "code.sandbox"),
    )
    _reject_unknown(raw, "code")
    _check_chunking(cfg.chunk_size, cfg.chunk_overlap, "code")
    for name in ("top_k", "top_files", "max_prompt_code_bytes", "max_debug_iters"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"code.{name} must be positive")
    return cfg


def _parse_paper(raw: dict) -> PaperConfig:
    d = PaperConfig()
    retr_raw = _require_mapping(raw.pop("retriever", None), "paper.retriever")
    retriever = PaperRetrieverConfig(
        min_similarity=float(
            _take(retr_raw, "min_similarity", "paper.retriever", (int, float), d.retriever.min_similarity)
        )
    )
    _reject_unknown(retr_raw, "paper.retriever")
    if not -1.0 <= retriever.min_similarity <= 1.0:
        raise ConfigError("paper.retriever.min_similarity must be in [-1, 1]")
    cfg = PaperConfig(
        embed_model=_take(raw, "embed_model", "paper", str, d.embed_model),
        chunk_size=_take(raw, "chunk_size", "paper", int, d.chunk_size),
        chunk_overlap=_take(raw, "chunk_overlap", "paper", int, d.chunk_overlap),
        top_k=_take(raw, "top_k", "paper", int, d.top_k),
        retriever=retriever,
    )
    _reject_unknown(raw, "paper")
    _check_chunking(cfg.chunk_size, cfg.chunk_overlap, "paper")
    if cfg.top_k <= 0:
        raise ConfigError("paper.top_k must be positive")
    return cfg


def _parse_retrieve(raw: dict) -> RetrieveConfig:
    d = RetrieveConfig()
    cfg = RetrieveConfig(
        embed_model=_take(raw, "embed_model", "retrieve", str, d.embed_model),
        technique_similarity=float(
            _take(raw, "technique_similarity", "retrieve", (int, float), d.technique_similarity)
        ),
        paper_similarity=float(
            _take(raw, "paper_similarity", "retrieve", (int, float), d.paper_similarity)
        ),
        max_hits=_take(raw, "max_hits", "retrieve", int, d.max_hits),
        filter_by_paper=_take(raw, "filter_by_paper", "retrieve", bool, d.filter_by_paper),
    )
    _reject_unknown(raw, "retrieve")
    for name in ("technique_similarity", "paper_similarity"):
        if not -1.0 <= getattr(cfg, name) <= 1.0:
            raise ConfigError(f"retrieve.{name} must be in [-1, 1]")
    if cfg.max_hits <= 0:
        raise ConfigError("retrieve.max_hits must be positive")
    return cfg


def _parse_global(raw: dict) -> GlobalConfig:
    d = GlobalConfig()
    cfg = GlobalConfig(
        log_level=_take(raw, "log_level", "global", str, d.log_level),
        kg_path=_take(raw, "kg_path", "global", str, d.kg_path),
        model=_take(raw, "model", "global", str, d.model),
        paper_model=_take(raw, "paper_model", "global", str, d.paper_model),
        code_model=_take(raw, "code_model", "global", str, d.code_model),
        max_retries=_take(raw, "max_retries", "global", int, d.max_retries),
        requests_per_minute=_take(raw, "requests_per_minute", "global", (int, type(None)), d.requests_per_minute),
        top_refs=_take(raw, "top_refs", "global", int, d.top_refs),
        fixtures_path=_take(raw, "fixtures_path", "global", (str, type(None)), d.fixtures_path),
    )
    _reject_unknown(raw, "global")
    if cfg.log_level not in _LOG_LEVELS:
        raise ConfigError(f"global.log_level must be one of {', '.join(_LOG_LEVELS)}")
    if cfg.max_retries < 0:
        raise ConfigError("global.max_retries must be nonnegative")
    if cfg.requests_per_minute is not None and cfg.requests_per_minute <= 0:
        raise ConfigError("global.requests_per_minute must be positive or null")
    if cfg.top_refs <= 0:
        raise ConfigError("global.top_refs must be positive")
    return cfg


def config_from_mapping(doc: dict) -> Config:
    doc = dict(_require_mapping(doc, "config"))
    cfg = Config(
        code=_parse_code(_require_mapping(doc.pop("code", None), "code")),
        paper=_parse_paper(_require_mapping(doc.pop("paper", None), "paper")),
        retrieve=_parse_retrieve(_require_mapping(doc.pop("retrieve", None), "retrieve")),
        global_=_parse_global(_require_mapping(doc.pop("global", None), "global")),
    )
    if doc:
        raise ConfigError(f"unknown config key {sorted(doc)[0]}")
    return cfg


def config_to_mapping(cfg: Config) -> dict:
    return {
        "code": {
            "embed_model": cfg.code.embed_model,
            "chunk_size": cfg.code.chunk_size,
            "chunk_overlap": cfg.code.chunk_overlap,
            "top_k": cfg.code.top_k,
            "top_files": cfg.code.top_files,
            "max_prompt_code_bytes": cfg.code.max_prompt_code_bytes,
            "exec_check_code": cfg.code.exec_check_code,
            "max_debug_iters": cfg.code.max_debug_iters,
            "sandbox": {
                "timeout_seconds": cfg.code.sandbox.timeout_seconds,
                "grace_seconds": cfg.code.sandbox.grace_seconds,
                "stream_cap_bytes": cfg.code.sandbox.stream_cap_bytes,
                "allow_network": cfg.code.sandbox.allow_network,
                "interpreter": cfg.code.sandbox.interpreter,
            },
        },
        "paper": {
            "embed_model": cfg.paper.embed_model,
            "chunk_size": cfg.paper.chunk_size,
            "chunk_overlap": cfg.paper.chunk_overlap,
            "top_k": cfg.paper.top_k,
            "retriever": {"min_similarity": cfg.paper.retriever.min_similarity},
        },
        "retrieve": {
            "embed_model": cfg.retrieve.embed_model,
            "technique_similarity": cfg.retrieve.technique_similarity,
            "paper_similarity": cfg.retrieve.paper_similarity,
            "max_hits": cfg.retrieve.max_hits,
            "filter_by_paper": cfg.retrieve.filter_by_paper,
        },
        "global": {
            "log_level": cfg.global_.log_level,
            "kg_path": cfg.global_.kg_path,
            "model": cfg.global_.model,
            "paper_model": cfg.global_.paper_model,
            "code_model": cfg.global_.code_model,
            "max_retries": cfg.global_.max_retries,
            "requests_per_minute": cfg.global_.requests_per_minute,
            "top_refs": cfg.global_.top_refs,
            "fixtures_path": cfg.global_.fixtures_path,
        },
    }


def load_config(path: str | Path) -> Config:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text("utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping, got {type(doc).__name__}")
    return config_from_mapping(doc)


def save_config(cfg: Config, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(config_to_mapping(cfg), sort_keys=False), "utf-8")


def default_config() -> Config:
    return Config()
