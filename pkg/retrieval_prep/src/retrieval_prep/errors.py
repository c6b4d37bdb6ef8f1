"""Exception types raised by retrieval-prep."""

from __future__ import annotations


class RetrievalPrepError(Exception):
    """Base class for all errors raised by this package."""


class CorpusFormatError(RetrievalPrepError):
    """A corpus file line is malformed; the message names the offending line."""


class DatasetFormatError(RetrievalPrepError):
    """A question-dataset line is malformed; the message names the offending line."""


class EmptyCorpusError(RetrievalPrepError):
    """An index was requested over a corpus with no passages."""


class EmbedderLoadError(RetrievalPrepError):
    """The requested embedder could not be constructed."""


class IndexFormatError(RetrievalPrepError):
    """A saved index directory is missing files or internally inconsistent."""
