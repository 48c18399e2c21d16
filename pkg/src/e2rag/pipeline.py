# =============================================================================
# E2RAG INDEXING PIPELINE
# chunker -> (summary tree || entity graph) -> embeddings
# =============================================================================
"""
Index construction.

The tree and graph stages only share the chunk list, so they run in
parallel; embedding waits for the finished tree.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Tuple, TypeVar

from e2rag.chunker import split_into_chunks, tokenize
from e2rag.config import Settings
from e2rag.errors import BackendError, IndexingFailed
from e2rag.graph import build_entity_graph
from e2rag.models import BuildParams, BuildStats, StageTimings
from e2rag.services import Backends, offline_backends
from e2rag.storage import IndexArtifact
from e2rag.tree import build_summary_tree, embed_all, predict_summarizer_calls

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _timed(fn: Callable[..., T], *args) -> Tuple[T, float]:
    started = time.perf_counter()
    value = fn(*args)
    return value, (time.perf_counter() - started) * 1000.0


def params_from_settings(settings: Settings, provenance: str = "<memory>") -> BuildParams:
    return BuildParams(
        chunk_size=settings.CHUNK_SIZE,
        overlap=settings.OVERLAP,
        group_size=settings.GROUP_SIZE,
        grouping=settings.GROUPING,
        build_to_root=settings.BUILD_TO_ROOT,
        provenance=provenance,
    )


def build_index(
    text: str,
    params: Optional[BuildParams] = None,
    backends: Optional[Backends] = None,
    workers: int = 4,
    embed_batch_size: int = 64,
) -> IndexArtifact:
    """
    Build the complete index for one document.

    Raises:
        EmptyDocument / InvalidChunkConfig: from the chunker
        IndexingFailed: when a backend fails in the tree, graph or embed stage
    """
    params = params or BuildParams()
    backends = backends or offline_backends()
    calls_before = backends.counter.snapshot()
    started = time.perf_counter()
    logger.info(f"🚀 Indexing {params.provenance}")

    stream = tokenize(text, provenance=params.provenance)
    chunks, chunking_ms = _timed(split_into_chunks, stream, params.chunk_size, params.overlap)
    logger.info(f"📄 {len(stream)} tokens -> {len(chunks)} chunks")

    with ThreadPoolExecutor(max_workers=2) as pool:
        tree_future = pool.submit(
            _timed,
            build_summary_tree,
            chunks,
            params.group_size,
            backends.summarizer,
            params.grouping,
            params.build_to_root,
            workers,
        )
        graph_future = pool.submit(_timed, build_entity_graph, chunks, backends.extractor)
        tree, tree_ms = tree_future.result()
        try:
            (graph, index), graph_ms = graph_future.result()
        except BackendError as e:
            raise IndexingFailed(
                f"entity extraction failed: {e}",
                progress={"stage": "graph", "chunks": len(chunks), "summarizer_calls": tree.summarizer_calls},
            ) from e

    store, embed_ms = _timed(embed_all, tree, backends.embedder, embed_batch_size)
    total_ms = (time.perf_counter() - started) * 1000.0

    calls_after = backends.counter.snapshot()
    stats = BuildStats(
        summarizer_calls=tree.summarizer_calls,
        predicted_summarizer_calls=predict_summarizer_calls(
            len(chunks), params.group_size, params.grouping, params.build_to_root
        ),
        embedder_calls=calls_after["embedder_calls"] - calls_before["embedder_calls"],
        timings=StageTimings(
            chunking_ms=chunking_ms,
            tree_ms=tree_ms,
            graph_ms=graph_ms,
            embed_ms=embed_ms,
            total_index_ms=total_ms,
        ),
    )
    logger.info(
        f"✅ Index ready: {len(chunks)} chunks, {tree.summary_count} summaries, "
        f"{len(graph)} entities, {stats.summarizer_calls} summarizer calls in {total_ms:.0f} ms"
    )
    return IndexArtifact(
        params=params.model_copy(update=backends.identifiers()),
        chunks=chunks,
        tree=tree,
        store=store,
        graph=graph,
        index=index,
        stats=stats,
    )
