# src/e2rag/tree.py
"""
Recursive summary tree over document chunks.

Consecutive groups of `g` nodes are summarized level by level until at most
`g` nodes remain (or a single root with build_to_root). Two grouping rules
are supported:

    carry: only full groups of g are summarized; the trailing remainder is
           promoted node by node and joins the next level's grouping. Every
           summarizer call removes exactly g-1 nodes, so calls <= ceil(n/(g-1)).
    ceil:  level l+1 has ceil(m/g) nodes; a trailing partial group of >= 2
           nodes is summarized, a trailing singleton is promoted.

A promoted node is carried into the next level under its own id: no new
node, no vector and no summarizer call. A level may therefore list nodes
built at a lower level, and every node above level 0 is a real summary.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from e2rag.errors import (
    BackendError,
    EmbeddingDimensionMismatch,
    IndexingFailed,
    IndexNotBuilt,
    InvalidTreeConfig,
    NodeNotFound,
)
from e2rag.models import Chunk, SummaryTree, TreeNode
from e2rag.services.base import Embedder, Summarizer
from e2rag.services.embedder import repair_zero_rows

logger = logging.getLogger(__name__)

GROUPINGS = ("carry", "ceil")


# =============================================================================
# VECTOR STORE
# =============================================================================

class VectorStore:
    """Exact in-memory store: row i is the embedding of tree node i."""

    def __init__(self, vectors: np.ndarray):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D array")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vectors must be finite")
        self.vectors = vectors
        self.vectors.setflags(write=False)
        norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
        self._norms = np.where(norms > 0, norms, 1.0)

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorStore):
            return NotImplemented
        return self.vectors.shape == other.vectors.shape and bool(np.array_equal(self.vectors, other.vectors))

    def cosine_scores(self, query: np.ndarray) -> np.ndarray:
        """Cosine similarity of `query` against every stored vector."""
        if len(self) == 0:
            raise IndexNotBuilt("vector store is empty")
        query = np.asarray(query, dtype=np.float64).reshape(-1)
        if query.shape[0] != self.dimension:
            raise EmbeddingDimensionMismatch(
                f"query has dimension {query.shape[0]}, store has {self.dimension}"
            )
        qnorm = np.linalg.norm(query)
        if qnorm == 0:
            return np.zeros(len(self), dtype=np.float64)
        return (self.vectors.astype(np.float64) @ query) / (self._norms * qnorm)


# =============================================================================
# GROUPING
# =============================================================================

def group_level(m: int, g: int, grouping: str = "carry", build_to_root: bool = False) -> Optional[List[Tuple[int, int]]]:
    """
    Half-open index ranges grouping the m nodes of one level, or None when
    the recursion stops at this level.
    """
    if grouping not in GROUPINGS:
        raise ValueError(f"unknown grouping {grouping!r}; expected one of {GROUPINGS}")
    if m <= 1 or (m <= g and not build_to_root):
        return None
    if m <= g:
        return [(0, m)]
    full = m // g
    groups = [(i * g, (i + 1) * g) for i in range(full)]
    tail = full * g
    if tail < m:
        if grouping == "ceil" and m - tail > 1:
            groups.append((tail, m))
        else:
            groups.extend((j, j + 1) for j in range(tail, m))
    return groups


def predict_summarizer_calls(n: int, g: int, grouping: str = "carry", build_to_root: bool = False) -> int:
    """Exact summarizer call count of a build over n chunks, by level enumeration."""
    calls = 0
    m = n
    while True:
        groups = group_level(m, g, grouping, build_to_root)
        if groups is None:
            return calls
        calls += sum(1 for start, end in groups if end - start > 1)
        m = len(groups)


# =============================================================================
# TREE CONSTRUCTION
# =============================================================================

def build_summary_tree(
    chunks: Sequence[Chunk],
    g: int,
    summarizer: Summarizer,
    grouping: str = "carry",
    build_to_root: bool = False,
    max_workers: int = 4,
) -> SummaryTree:
    """
    Build the tree bottom-up. Summaries within one level are requested
    concurrently; each level waits for the previous one.

    Raises:
        IndexingFailed: when the summarizer fails (after its own retries)
    """
    if g < 2:
        raise InvalidTreeConfig(f"group size g must be >= 2 (got {g})")
    if not chunks:
        raise ValueError("cannot build a summary tree without chunks")

    nodes: List[TreeNode] = [
        TreeNode(node_id=c.chunk_id, level=0, children=[], text=c.text, embedding_ref=c.chunk_id)
        for c in chunks
    ]
    levels: List[List[int]] = [[n.node_id for n in nodes]]
    calls = 0

    logger.info(f"🌳 Building summary tree over {len(nodes)} chunks (g={g}, grouping={grouping})")

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        while True:
            current = levels[-1]
            groups = group_level(len(current), g, grouping, build_to_root)
            if groups is None:
                break

            member_ids = [current[start:end] for start, end in groups]
            to_summarize = [ids for ids in member_ids if len(ids) > 1]
            try:
                summaries = iter(list(pool.map(
                    lambda ids: summarizer.summarize([nodes[i].text for i in ids]),
                    to_summarize,
                )))
            except BackendError as e:
                raise IndexingFailed(
                    f"summarizer failed while building level {len(levels)}: {e}",
                    progress={
                        "stage": "tree",
                        "levels_completed": len(levels) - 1,
                        "summarizer_calls": calls,
                        "summary_nodes": len(nodes) - len(levels[0]),
                    },
                ) from e
            calls += len(to_summarize)

            level = len(levels)
            next_level: List[int] = []
            for ids in member_ids:
                if len(ids) == 1:
                    next_level.append(ids[0])
                    continue
                node_id = len(nodes)
                nodes.append(TreeNode(
                    node_id=node_id,
                    level=level,
                    children=list(ids),
                    text=next(summaries),
                    embedding_ref=node_id,
                ))
                next_level.append(node_id)
            levels.append(next_level)
            logger.debug(f"Level {level}: {len(next_level)} nodes, {len(to_summarize)} summaries")

    logger.info(f"✅ Summary tree built: {len(levels)} levels, {len(nodes) - len(chunks)} summary nodes, {calls} summarizer calls")
    return SummaryTree(nodes=nodes, levels=levels, group_size=g, summarizer_calls=calls)


def embed_all(tree: SummaryTree, embedder: Embedder, batch_size: int = 64) -> VectorStore:
    """
    Embed every tree node in node_id order.

    Raises:
        IndexingFailed: when the embedder fails
        EmbeddingDimensionMismatch: when batches disagree on the dimension
    """
    texts = [node.text for node in tree.nodes]
    empty = [node.node_id for node in tree.nodes if not node.text.strip()]
    if empty:
        raise ValueError(f"tree nodes without text cannot be embedded: {empty[:5]}")

    batches: List[np.ndarray] = []
    for start in range(0, len(texts), max(1, batch_size)):
        try:
            batch = np.asarray(embedder.embed(texts[start:start + batch_size]), dtype=np.float32)
        except BackendError as e:
            raise IndexingFailed(
                f"embedder failed on nodes {start}..{start + batch_size - 1}: {e}",
                progress={"stage": "embed", "nodes_embedded": start},
            ) from e
        if batches and batch.shape[1] != batches[0].shape[1]:
            raise EmbeddingDimensionMismatch(
                f"batch at node {start} has dimension {batch.shape[1]}, expected {batches[0].shape[1]}"
            )
        batches.append(batch)

    store = VectorStore(repair_zero_rows(np.vstack(batches)))
    logger.info(f"✅ Embedded {len(store)} tree nodes (dimension {store.dimension})")
    return store


# =============================================================================
# TREE QUERIES
# =============================================================================

def collapsed_nodes(tree: SummaryTree) -> List[TreeNode]:
    """All nodes of every level, ordered by node_id."""
    return sorted(tree.nodes, key=lambda n: n.node_id)


def get_node(tree: SummaryTree, node_id: int) -> TreeNode:
    if not 0 <= node_id < len(tree.nodes):
        raise NodeNotFound(f"node {node_id} is not in the tree")
    return tree.nodes[node_id]


def leaf_range(tree: SummaryTree, node_id: int) -> Tuple[int, int]:
    """Inclusive (first, last) leaf chunk ids under a node."""
    first = last = get_node(tree, node_id)
    while first.children:
        first = tree.nodes[first.children[0]]
    while last.children:
        last = tree.nodes[last.children[-1]]
    return first.node_id, last.node_id


def subtree_leaf_ids(tree: SummaryTree, node_id: int) -> List[int]:
    """
    Chunk ids covered by a node. Children are consecutive in document order,
    so the covered leaves form one contiguous range.
    """
    first, last = leaf_range(tree, node_id)
    return list(range(first, last + 1))
