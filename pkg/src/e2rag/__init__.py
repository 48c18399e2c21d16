# src/e2rag/__init__.py
"""
e2rag: retrieval over long documents with a summary tree and an entity graph.

Indexing runs chunking, then the summary tree and the entity co-occurrence
graph in parallel, then embeds every tree node. Retrieval picks between
local (entity-pair evidence) and global (dense over the collapsed tree)
modes without calling the summarizer.
"""

from e2rag.models import QueryContext, RetrievalMode, RetrievalResult
from e2rag.pipeline import build_index
from e2rag.retrieval import QueryEngine, RetrievalOptions, adaptive_retrieve
from e2rag.storage import IndexArtifact, load, save

__version__ = "0.1.0"

__all__ = [
    "IndexArtifact",
    "QueryContext",
    "QueryEngine",
    "RetrievalMode",
    "RetrievalOptions",
    "RetrievalResult",
    "adaptive_retrieve",
    "build_index",
    "load",
    "save",
]
