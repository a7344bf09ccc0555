"""Character-window chunking and exact cosine retrieval over embeddings.

The index is small (single repo or single paper), so search is exact
brute force over a dense matrix rather than an ANN structure.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmbeddingDimensionError
from .llm.provider import EmbeddingProvider

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 350
DEFAULT_CHUNK_OVERLAP = 100


@dataclass
class Chunk:
    """A contiguous character window of a source document."""

    text: str
    file_path: str | None
    start_char: int

    @property
    def end_char(self) -> int:
        return self.start_char + len(self.text)


@dataclass
class SearchResult:
    chunk: Chunk
    similarity: float


@dataclass
class VectorIndex:
    """Immutable-after-build pairing of chunks with their embedding rows."""

    chunks: list[Chunk] = field(default_factory=list)
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __len__(self) -> int:
        return len(self.chunks)


def split_text(
    text: str,
    file_path: str | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    chunk_overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> list[Chunk]:
    """Split text into fixed-size character windows with overlap.

    The stride is ``chunk_size - chunk_overlap``; the final window may be
    shorter. Every character of the input appears in at least one chunk
    and consecutive chunks share exactly ``chunk_overlap`` characters
    except possibly the last pair.
    """
    if chunk_size <= 0:
        raise ValueError(f"chunk_size must be positive, got {chunk_size}")
    if not 0 <= chunk_overlap < chunk_size:
        raise ValueError(f"chunk_overlap must be in [0, chunk_size), got {chunk_overlap}")
    if not text:
        return []
    stride = chunk_size - chunk_overlap
    chunks = []
    start = 0
    while True:
        end = min(start + chunk_size, len(text))
        chunks.append(Chunk(text=text[start:end], file_path=file_path, start_char=start))
        if end == len(text):
            break
        start += stride
    return chunks


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    Zero vectors compare as 0.0 to everything.
    """
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.dot(a, b)) / (na * nb)
    return max(-1.0, min(1.0, value))


class CachedEmbeddingProvider:
    """Memoizing wrapper so repeated texts hit the backend exactly once.

    Cache keys are (model_id, sha256(text)); distinct models never share
    entries.
    """

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self._cache: dict[tuple[str, str], np.ndarray] = {}
        self.backend_calls = 0

    @property
    def model_id(self) -> str:
        return self.inner.model_id

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        keys = [(self.inner.model_id, hashlib.sha256(t.encode("utf-8")).hexdigest()) for t in texts]
        missing_positions = []
        missing_texts = []
        seen: set[tuple[str, str]] = set()
        for pos, (key, text) in enumerate(zip(keys, texts)):
            if key not in self._cache and key not in seen:
                seen.add(key)
                missing_positions.append(pos)
                missing_texts.append(text)
        if missing_texts:
            self.backend_calls += 1
            fresh = self.inner.embed(missing_texts)
            if len(fresh) != len(missing_texts):
                raise EmbeddingDimensionError(
                    f"backend returned {len(fresh)} vectors for {len(missing_texts)} texts"
                )
            for pos, vec in zip(missing_positions, fresh):
                self._cache[keys[pos]] = np.asarray(vec, dtype=np.float64)
        return [self._cache[key] for key in keys]


def build_index(chunks: list[Chunk], provider: EmbeddingProvider) -> VectorIndex:
    """Embed all chunks and assemble the search matrix.

    Construction is atomic: on any embedding failure no partial index is
    produced. All rows must share one dimension and be finite.
    """
    if not chunks:
        return VectorIndex(chunks=[], matrix=np.zeros((0, 0)))
    vectors = provider.embed([c.text for c in chunks])
    if len(vectors) != len(chunks):
        raise EmbeddingDimensionError(f"expected {len(chunks)} vectors, got {len(vectors)}")
    dim = None
    rows = []
    for i, vec in enumerate(vectors):
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1:
            raise EmbeddingDimensionError(f"vector {i} has shape {arr.shape}, expected 1-D")
        if dim is None:
            dim = arr.shape[0]
        elif arr.shape[0] != dim:
            raise EmbeddingDimensionError(f"vector {i} has dimension {arr.shape[0]}, expected {dim}")
        if not np.all(np.isfinite(arr)):
            raise EmbeddingDimensionError(f"vector {i} contains non-finite values")
        rows.append(arr)
    return VectorIndex(chunks=list(chunks), matrix=np.stack(rows))


def query_index(index: VectorIndex, query_vector: np.ndarray, top_k: int) -> list[SearchResult]:
    """Exact top-k cosine search over the index.

    Results are ordered by similarity descending; ties break by
    (file_path, start_char) ascending so ranking is deterministic.
    """
    if top_k <= 0:
        raise ValueError(f"top_k must be positive, got {top_k}")
    if not index.chunks:
        return []
    q = np.asarray(query_vector, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != index.matrix.shape[1]:
        raise EmbeddingDimensionError(
            f"query has shape {q.shape}, index dimension is {index.matrix.shape[1]}"
        )
    sims = [cosine_similarity(q, index.matrix[i]) for i in range(len(index.chunks))]
    order = sorted(
        range(len(index.chunks)),
        key=lambda i: (-sims[i], index.chunks[i].file_path or "", index.chunks[i].start_char),
    )
    return [SearchResult(chunk=index.chunks[i], similarity=sims[i]) for i in order[:top_k]]


def index_files(
    files: dict[str, str],
    provider: EmbeddingProvider,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    chunk_overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> VectorIndex:
    """Chunk and index a path-to-content mapping in sorted path order."""
    chunks: list[Chunk] = []
    for path in sorted(files):
        chunks.extend(split_text(files[path], file_path=path, chunk_size=chunk_size, chunk_overlap=chunk_overlap))
    return build_index(chunks, provider)


def merge_results_by_file(results: list[SearchResult]) -> dict[str, list[SearchResult]]:
    """Group hits by source file, preserving rank order inside each group."""
    grouped: dict[str, list[SearchResult]] = {}
    for result in results:
        grouped.setdefault(result.chunk.file_path or "", []).append(result)
    return grouped
