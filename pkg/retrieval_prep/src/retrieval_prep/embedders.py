"""Text embedders producing unit-normalized dense vectors."""

from __future__ import annotations

import re
import zlib
from typing import Protocol, Sequence

import numpy as np

from .errors import EmbedderLoadError

_TOKEN_PATTERN = re.compile(r"[a-z0-9]+")
_HASH_NAME_PATTERN = re.compile(r"^hash-(\d+)$")


class Embedder(Protocol):
    """Maps batches of texts to L2-normalized float64 vectors."""

    name: str
    dim: int

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        """Return an array of shape ``(len(texts), dim)`` with unit rows."""
        ...


class HashingEmbedder:
    """Deterministic embedder with no model weights.

    Tokens are lowercased alphanumeric runs.  Each token is hashed with
    crc32; the low bits pick a bucket and bit 31 picks the sign, so a text
    becomes a signed bag-of-buckets vector which is then L2-normalized.
    Texts that produce no tokens fall back to hashing the whole raw text so
    every row stays a unit vector.
    """

    def __init__(self, dim: int = 256) -> None:
        if dim < 1:
            raise EmbedderLoadError(f"hash embedder dim must be >= 1, got {dim}")
        self.dim = dim
        self.name = f"hash-{dim}"

    def _accumulate(self, vector: np.ndarray, token: str) -> None:
        digest = zlib.crc32(token.encode("utf-8"))
        sign = -1.0 if digest & 0x80000000 else 1.0
        vector[digest % self.dim] += sign

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = _TOKEN_PATTERN.findall(text.lower())
            if not tokens:
                tokens = [text]
            for token in tokens:
                self._accumulate(out[row], token)
            norm = float(np.linalg.norm(out[row]))
            if norm == 0.0:
                # Signed buckets cancelled out exactly; fall back to an
                # unsigned count of the same buckets so the row is nonzero.
                for token in tokens:
                    out[row][zlib.crc32(token.encode("utf-8")) % self.dim] += 1.0
                norm = float(np.linalg.norm(out[row]))
            out[row] /= norm
        return out


class SentenceTransformerEmbedder:
    """Wraps a sentence-transformers model behind the ``Embedder`` protocol."""

    def __init__(self, model_name: str, model: object) -> None:
        self.name = model_name
        self._model = model
        probe = self._encode_raw(["probe"])
        self.dim = int(probe.shape[1])

    def _encode_raw(self, texts: Sequence[str]) -> np.ndarray:
        raw = self._model.encode(list(texts), convert_to_numpy=True)  # type: ignore[attr-defined]
        return np.asarray(raw, dtype=np.float64).reshape(len(texts), -1)

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = self._encode_raw(texts)
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return out / norms


def _load_sentence_transformer(model_name: str) -> object:
    from sentence_transformers import SentenceTransformer

    return SentenceTransformer(model_name)


def make_embedder(name: str, loader=_load_sentence_transformer) -> Embedder:
    """Construct an embedder from its name.

    ``hash-{dim}`` (for example ``hash-256``) builds the deterministic
    offline :class:`HashingEmbedder`.  Any other name is treated as a
    sentence-transformers model id and loaded lazily; failures to import the
    library or load the model raise :class:`EmbedderLoadError`.
    """
    match = _HASH_NAME_PATTERN.match(name)
    if match:
        return HashingEmbedder(dim=int(match.group(1)))
    try:
        model = loader(name)
        return SentenceTransformerEmbedder(name, model)
    except EmbedderLoadError:
        raise
    except Exception as exc:
        raise EmbedderLoadError(f"could not load embedder {name!r}: {exc}") from exc
