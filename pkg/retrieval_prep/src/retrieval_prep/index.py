"""Dense passage index: build, persist, and query."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import CorpusPassage, load_corpus
from .embedders import Embedder
from .errors import EmptyCorpusError, IndexFormatError

_UNIT_NORM_TOLERANCE = 1e-6
_VECTORS_FILE = "vectors.npy"
_PASSAGES_FILE = "passages.jsonl"
_META_FILE = "meta.json"


@dataclass(frozen=True)
class EmbeddingIndex:
    """Unit-normalized passage vectors paired with their passages.

    ``vectors`` has one float64 row per passage, in the same order as
    ``passages``; every row is L2-normalized so the inner product with a
    unit query vector is cosine similarity.  ``embedder_name`` records which
    embedder produced the rows so queries can be checked against it.
    """

    vectors: np.ndarray = field(repr=False)
    passages: tuple[CorpusPassage, ...]
    embedder_name: str

    def __post_init__(self) -> None:
        if not isinstance(self.vectors, np.ndarray) or self.vectors.ndim != 2:
            raise IndexFormatError("vectors must be a 2-D array")
        if self.vectors.dtype != np.float64:
            raise IndexFormatError(
                f"vectors must be float64, got {self.vectors.dtype}"
            )
        if self.vectors.shape[0] != len(self.passages):
            raise IndexFormatError(
                f"vector rows ({self.vectors.shape[0]}) != passages "
                f"({len(self.passages)})"
            )
        if len(self.passages) == 0:
            raise IndexFormatError("index must contain at least one passage")
        if not self.embedder_name.strip():
            raise IndexFormatError("embedder_name must be non-empty")
        norms = np.linalg.norm(self.vectors, axis=1)
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > _UNIT_NORM_TOLERANCE:
            raise IndexFormatError(
                f"vector rows must be unit-normalized (max deviation {worst:.3g})"
            )

    @property
    def passage_refs(self) -> tuple[str, ...]:
        """Passage ids in index order; row ``i`` of ``vectors`` embeds
        ``passages[i]`` whose id is ``passage_refs[i]``."""
        return tuple(p.source_id for p in self.passages)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def build_index(passages: Sequence[CorpusPassage], embedder: Embedder) -> EmbeddingIndex:
    """Embed every passage and assemble the index.

    Passage order is preserved.  Raises :class:`EmptyCorpusError` when given
    no passages.
    """
    if len(passages) == 0:
        raise EmptyCorpusError("cannot build an index over an empty corpus")
    vectors = embedder.encode([p.display_text() for p in passages])
    return EmbeddingIndex(
        vectors=np.asarray(vectors, dtype=np.float64),
        passages=tuple(passages),
        embedder_name=embedder.name,
    )


def retrieve_top_k(
    index: EmbeddingIndex, query: str, embedder: Embedder, k: int
) -> list[tuple[CorpusPassage, float]]:
    """Return the ``k`` passages most similar to ``query``.

    Scores are inner products between the unit query vector and the unit
    passage rows, i.e. cosine similarities.  Results are sorted by
    descending score; exact ties keep index order.  ``k`` is clamped to the
    number of passages.  The embedder must match the one that built the
    index.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if embedder.name != index.embedder_name:
        raise ValueError(
            f"index was built with {index.embedder_name!r} but query uses "
            f"{embedder.name!r}"
        )
    query_vec = embedder.encode([query])[0]
    scores = index.vectors @ query_vec
    top = min(k, len(index.passages))
    order = np.argsort(-scores, kind="stable")[:top]
    return [(index.passages[i], float(scores[i])) for i in order]


def save_index(index: EmbeddingIndex, out_dir: Path) -> None:
    """Persist an index as ``vectors.npy`` + ``passages.jsonl`` + ``meta.json``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    np.save(out_dir / _VECTORS_FILE, index.vectors)
    with open(out_dir / _PASSAGES_FILE, "w", encoding="utf-8") as handle:
        for passage in index.passages:
            record: dict[str, str] = {"source_id": passage.source_id}
            if passage.title is not None:
                record["title"] = passage.title
            record["text"] = passage.text
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    meta = {
        "embedder_name": index.embedder_name,
        "dim": index.dim,
        "count": len(index.passages),
    }
    with open(out_dir / _META_FILE, "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2)
        handle.write("\n")


def load_index(in_dir: Path) -> EmbeddingIndex:
    """Load an index saved by :func:`save_index`.

    Raises :class:`IndexFormatError` when files are missing or the metadata
    disagrees with the stored vectors and passages.
    """
    for name in (_VECTORS_FILE, _PASSAGES_FILE, _META_FILE):
        if not (in_dir / name).is_file():
            raise IndexFormatError(f"{in_dir}: missing {name}")
    try:
        vectors = np.load(in_dir / _VECTORS_FILE)
    except ValueError as exc:
        raise IndexFormatError(f"{in_dir}: unreadable {_VECTORS_FILE}: {exc}") from exc
    try:
        passages = load_corpus(in_dir / _PASSAGES_FILE)
    except Exception as exc:
        raise IndexFormatError(f"{in_dir}: bad {_PASSAGES_FILE}: {exc}") from exc
    try:
        with open(in_dir / _META_FILE, encoding="utf-8") as handle:
            meta = json.load(handle)
    except json.JSONDecodeError as exc:
        raise IndexFormatError(f"{in_dir}: invalid {_META_FILE}: {exc}") from exc
    if not isinstance(meta, dict) or not isinstance(meta.get("embedder_name"), str):
        raise IndexFormatError(f"{in_dir}: {_META_FILE} must name the embedder")
    if meta.get("count") != len(passages):
        raise IndexFormatError(
            f"{in_dir}: meta count {meta.get('count')} != passages {len(passages)}"
        )
    if vectors.ndim != 2 or meta.get("dim") != vectors.shape[1]:
        raise IndexFormatError(
            f"{in_dir}: meta dim {meta.get('dim')} != vector dim "
            f"{vectors.shape[1] if vectors.ndim == 2 else 'n/a'}"
        )
    try:
        return EmbeddingIndex(
            vectors=np.asarray(vectors, dtype=np.float64),
            passages=tuple(passages),
            embedder_name=meta["embedder_name"],
        )
    except IndexFormatError as exc:
        raise IndexFormatError(f"{in_dir}: {exc}") from exc
