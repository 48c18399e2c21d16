# src/e2rag/services/base.py
"""
Backend interfaces shared by the indexing and retrieval stages.

Three roles exist:
- Summarizer: turns a group of consecutive texts into one summary
- Embedder: turns texts into dense vectors
- EntityExtractor: finds entities in a sentence

Each role ships an offline implementation; summarizer and embedder also
have an HTTP implementation for OpenAI-compatible endpoints.
"""

import threading
from typing import Dict, List, Protocol, Sequence

import numpy as np

from e2rag.models import EntityOccurrence


class CallCounter:
    """Thread-safe, monotone call counters for the LLM-facing backends."""

    def __init__(self):
        self._lock = threading.Lock()
        self._summarizer_calls = 0
        self._embedder_calls = 0

    def record_summarizer_call(self) -> None:
        with self._lock:
            self._summarizer_calls += 1

    def record_embedder_call(self) -> None:
        with self._lock:
            self._embedder_calls += 1

    @property
    def summarizer_calls(self) -> int:
        with self._lock:
            return self._summarizer_calls

    @property
    def embedder_calls(self) -> int:
        with self._lock:
            return self._embedder_calls

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return {
                "summarizer_calls": self._summarizer_calls,
                "embedder_calls": self._embedder_calls,
            }


class Summarizer(Protocol):
    name: str
    counter: CallCounter

    def summarize(self, texts: Sequence[str]) -> str:
        ...


class Embedder(Protocol):
    name: str
    counter: CallCounter

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return a (len(texts), dimension) float32 array."""
        ...


class EntityExtractor(Protocol):
    name: str

    def extract(self, sentence: str) -> List[EntityOccurrence]:
        ...
