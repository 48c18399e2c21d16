# src/e2rag/services/embedder.py
"""Embedder backends: hashed bag-of-words offline vectors and an embeddings-endpoint client."""

import hashlib
import logging
from typing import Optional, Sequence

import httpx
import numpy as np

from e2rag.chunker import DEFAULT_TOKENIZER, Tokenizer
from e2rag.config import BackendConfig
from e2rag.errors import BackendError, EmbeddingDimensionMismatch
from e2rag.services.base import CallCounter
from e2rag.services.http import OpenAICompatibleClient

logger = logging.getLogger(__name__)


def repair_zero_rows(vectors: np.ndarray) -> np.ndarray:
    """Replace all-zero rows (texts with no tokens) by the uniform unit vector."""
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.size == 0:
        return vectors
    zero_rows = ~np.any(vectors, axis=1)
    if zero_rows.any():
        dim = vectors.shape[1]
        vectors = vectors.copy()
        vectors[zero_rows] = np.float32(1.0 / np.sqrt(dim))
    return vectors


class HashingEmbedder:
    """
    L2-normalized hashed bag-of-words.

    Each lowercased token is counted into bucket blake2b(token) mod dimension.
    Pure function of the input text; no seed, no state besides the counter.
    Empty texts map to the zero vector, which callers treat as invalid.
    """

    name = "offline"

    def __init__(
        self,
        counter: Optional[CallCounter] = None,
        dimension: int = 256,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    ):
        self.counter = counter or CallCounter()
        self.dimension = dimension
        self.tokenizer = tokenizer

    def bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.lower().encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dimension

    def counts(self, text: str) -> np.ndarray:
        tokens, _ = self.tokenizer.split(text)
        buckets = np.fromiter((self.bucket(t) for t in tokens), dtype=np.int64, count=len(tokens))
        return np.bincount(buckets, minlength=self.dimension).astype(np.float64)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        self.counter.record_embedder_call()
        out = np.zeros((len(texts), self.dimension), dtype=np.float32)
        for i, text in enumerate(texts):
            raw = self.counts(text)
            norm = np.linalg.norm(raw)
            if norm > 0:
                out[i] = (raw / norm).astype(np.float32)
        return out


class HttpEmbedder:
    """Calls an OpenAI-compatible /embeddings endpoint."""

    name = "http"

    def __init__(
        self,
        config: BackendConfig,
        counter: Optional[CallCounter] = None,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.config = config
        self.counter = counter or CallCounter()
        self.dimension: Optional[int] = None
        self._client = OpenAICompatibleClient(config, transport=transport)

    @property
    def identifier(self) -> str:
        return f"http:{self.config.model}"

    def close(self) -> None:
        self._client.close()

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        # Endpoints reject empty strings; those rows stay zero and get repaired by callers.
        indexed = [(i, t) for i, t in enumerate(texts) if t.strip()]
        self.counter.record_embedder_call()
        data = {"data": []}
        if indexed:
            payload = {"model": self.config.model, "input": [t for _, t in indexed]}
            data = self._client.post("/embeddings", payload)

        try:
            rows = sorted(data["data"], key=lambda item: item["index"])
            vectors = [np.asarray(item["embedding"], dtype=np.float32) for item in rows]
        except (KeyError, TypeError) as e:
            raise BackendError("embeddings response is missing data[].embedding") from e
        if len(vectors) != len(indexed):
            raise BackendError(f"requested {len(indexed)} embeddings, received {len(vectors)}")

        dims = {v.shape[0] for v in vectors}
        if self.dimension is not None:
            dims.add(self.dimension)
        if len(dims) > 1:
            raise EmbeddingDimensionMismatch(f"embedding dimensions differ: {sorted(dims)}")
        if dims:
            self.dimension = dims.pop()
        if self.dimension is None:
            raise BackendError("cannot embed only empty texts before the dimension is known")

        out = np.zeros((len(texts), self.dimension), dtype=np.float32)
        for (i, _), vector in zip(indexed, vectors):
            if not np.all(np.isfinite(vector)):
                raise BackendError("embedding endpoint returned non-finite values")
            out[i] = vector
        return out
