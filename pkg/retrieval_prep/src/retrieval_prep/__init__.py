"""Dense-retrieval preparation: index a passage corpus, attach top-k
contexts to questions, and export the result as evaluation-ready JSONL."""

from .corpus import CorpusPassage, load_corpus
from .embedders import Embedder, HashingEmbedder, make_embedder
from .errors import (
    CorpusFormatError,
    DatasetFormatError,
    EmbedderLoadError,
    EmptyCorpusError,
    IndexFormatError,
    RetrievalPrepError,
)
from .export import QuestionRecord, export_contexts, load_questions
from .index import (
    EmbeddingIndex,
    build_index,
    load_index,
    retrieve_top_k,
    save_index,
)

__version__ = "0.1.0"

__all__ = [
    "CorpusPassage",
    "load_corpus",
    "Embedder",
    "HashingEmbedder",
    "make_embedder",
    "RetrievalPrepError",
    "CorpusFormatError",
    "DatasetFormatError",
    "EmptyCorpusError",
    "EmbedderLoadError",
    "IndexFormatError",
    "QuestionRecord",
    "load_questions",
    "export_contexts",
    "EmbeddingIndex",
    "build_index",
    "retrieve_top_k",
    "save_index",
    "load_index",
    "__version__",
]
