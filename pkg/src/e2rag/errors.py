# src/e2rag/errors.py
"""
Exception hierarchy for e2rag.

Every error carries the process exit code the CLI should return:
    2 - usage or I/O problems (bad input, bad flags, unreadable index)
    1 - algorithmic failures (backend exhausted, broken invariants)
"""

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class E2RagError(Exception):
    """Base class for all e2rag errors."""
    exit_code: int = EXIT_FAILURE


# =============================================================================
# USAGE / INPUT ERRORS (exit 2)
# =============================================================================

class EmptyDocument(E2RagError):
    exit_code = EXIT_USAGE


class InvalidChunkConfig(E2RagError):
    exit_code = EXIT_USAGE


class InvalidTreeConfig(E2RagError):
    exit_code = EXIT_USAGE


class CorruptIndex(E2RagError):
    exit_code = EXIT_USAGE


class VersionMismatch(E2RagError):
    exit_code = EXIT_USAGE


class IndexIOError(E2RagError):
    """Reading or writing an index file failed at the OS level."""
    exit_code = EXIT_USAGE


# =============================================================================
# ALGORITHMIC ERRORS (exit 1)
# =============================================================================

class BackendError(E2RagError):
    """A summarizer/embedder/extractor backend failed after its retries."""


class EmbeddingDimensionMismatch(E2RagError):
    pass


class NodeNotFound(E2RagError):
    pass


class VertexNotFound(E2RagError):
    pass


class IndexNotBuilt(E2RagError):
    pass


class IndexingFailed(E2RagError):
    """
    Raised when the indexing stage cannot finish.

    `progress` describes how far the build got, e.g.
    {"stage": "tree", "levels_completed": 2, "summarizer_calls": 17}.
    """

    def __init__(self, message: str, progress: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.progress: Dict[str, Any] = progress or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.progress:
            return base
        return f"{base} (progress: {self.progress})"
