# =============================================================================
# E2RAG QUERY ENGINE
# Adaptive local/global retrieval over the entity graph and summary tree
# =============================================================================
"""
Query-time retrieval. No summarizer is ever called here; the embedder is
used at most once per query, and only on the global paths.

Dispatch:
    no query entity in the graph        -> GlobalDense
    entities but no pair within h hops  -> GlobalOccurrence
    pairs with shared chunks            -> Local (shrinking h while too many)
    shrinking emptied the candidates    -> LocalEntityAware on the last non-empty set
"""

import logging
import math
import time
from itertools import combinations
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, model_validator

from e2rag.chunker import DEFAULT_TOKENIZER, Tokenizer
from e2rag.errors import IndexNotBuilt, VertexNotFound
from e2rag.formatter import build_blocks, render, render_plain
from e2rag.graph import EntityGraph, extract_entities, split_sentences
from e2rag.models import (
    BiIndex,
    PairEvidence,
    QueryContext,
    RetrievalMode,
    RetrievalResult,
    SummaryTree,
    TraceStep,
)
from e2rag.services.base import Embedder, EntityExtractor
from e2rag.storage import IndexArtifact
from e2rag.tree import VectorStore, collapsed_nodes, leaf_range

logger = logging.getLogger(__name__)

LOCAL_MODES = (RetrievalMode.LOCAL, RetrievalMode.LOCAL_ENTITY_AWARE)


class RetrievalOptions(BaseModel):
    """Mode override and component switches for ablation runs."""
    mode: Literal["auto", "dense"] = "auto"
    use_graph_filter: bool = True
    use_entity_aware_rank: bool = True
    use_occurrence_rank: bool = True
    use_dense_retrieval: bool = True

    @model_validator(mode="after")
    def check_dense_mode(self):
        if self.mode == "dense" and not self.use_dense_retrieval:
            raise ValueError("dense mode needs dense retrieval")
        return self


# =============================================================================
# GRAPH FILTER AND INDEX MAPPING
# =============================================================================

def hop_distance(graph: EntityGraph, a: str, b: str) -> float:
    """Unweighted shortest-path length, math.inf when disconnected."""
    for vertex in (a, b):
        if vertex not in graph:
            raise VertexNotFound(f"{vertex!r} is not a graph vertex")
    try:
        return nx.shortest_path_length(graph.nx, a, b)
    except nx.NetworkXNoPath:
        return math.inf


def graph_filter(
    graph: EntityGraph,
    entities: Iterable[str],
    h: int,
    use_graph_filter: bool = True,
) -> List[Tuple[str, str]]:
    """
    Pairs (a, b), a < b, of distinct query entities at most h hops apart,
    in lexicographic order. Entities missing from the graph are ignored.
    """
    if h < 0:
        raise ValueError("hop threshold must be >= 0")
    names = sorted({e for e in entities if e in graph})
    if not use_graph_filter:
        return list(combinations(names, 2))
    if h == 0:
        return []
    pairs: List[Tuple[str, str]] = []
    for i, a in enumerate(names[:-1]):
        reachable = nx.single_source_shortest_path_length(graph.nx, a, cutoff=h)
        pairs.extend((a, b) for b in names[i + 1:] if b in reachable)
    return pairs


def index_mapping(pairs: Sequence[Tuple[str, str]], index: BiIndex) -> Tuple[List[int], List[PairEvidence]]:
    """Per-pair shared chunks and their ascending union."""
    candidates = set()
    evidence: List[PairEvidence] = []
    for a, b in pairs:
        shared = sorted(set(index.chunks_of(a)) & set(index.chunks_of(b)))
        evidence.append(PairEvidence(entities=(a, b), chunks=shared))
        candidates.update(shared)
    return sorted(candidates), evidence


# =============================================================================
# RANKING
# =============================================================================

def dense_retrieve(query_vector: np.ndarray, store: VectorStore, tree: SummaryTree, m: int) -> List[Tuple[int, float]]:
    """
    Exact cosine top-m over every tree node, as (node_id, score) pairs.
    Equal scores are ordered by node_id.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(store) == 0 or not tree.nodes:
        raise IndexNotBuilt("no embedded tree nodes to search")
    if len(store) != len(tree.nodes):
        raise IndexNotBuilt(f"store holds {len(store)} vectors for {len(tree.nodes)} tree nodes")
    nodes = collapsed_nodes(tree)
    node_ids = np.array([node.node_id for node in nodes])
    scores = store.cosine_scores(query_vector)[[node.embedding_ref for node in nodes]]
    order = np.lexsort((node_ids, -scores))[:m]
    return [(int(node_ids[i]), float(scores[i])) for i in order]


def occurrence_weight(node_id: int, entities: Iterable[str], index: BiIndex, tree: SummaryTree) -> int:
    """Total occurrences of the query entities in the leaves under a node."""
    wanted = set(entities)
    first, last = leaf_range(tree, node_id)
    total = 0
    for chunk_id in range(first, last + 1):
        freqs = index.frequencies(chunk_id)
        total += sum(n for e, n in freqs.items() if e in wanted)
    return total


def occurrence_rank(
    candidates: Sequence[int],
    entities: Iterable[str],
    index: BiIndex,
    tree: SummaryTree,
    k: int,
) -> List[int]:
    """
    Re-rank dense candidates (given in similarity order) by occurrence
    weight; ties keep the similarity order, then node_id.
    """
    entities = list(entities)
    keyed = [
        (-occurrence_weight(node_id, entities, index, tree), rank, node_id)
        for rank, node_id in enumerate(candidates)
    ]
    return [node_id for _, _, node_id in sorted(keyed)[:k]]


def entity_aware_rank(chunks: Iterable[int], entities: Iterable[str], index: BiIndex, k: int) -> List[int]:
    """Coverage of distinct query entities first, then total frequency, then document order."""
    wanted = set(entities)

    def key(chunk_id: int):
        present = {e: n for e, n in index.frequencies(chunk_id).items() if e in wanted}
        return -len(present), -sum(present.values()), chunk_id

    return sorted(set(chunks), key=key)[:k]


# =============================================================================
# ADAPTIVE RETRIEVAL
# =============================================================================

def _embed_query(embedder: Embedder, text: str) -> np.ndarray:
    return np.asarray(embedder.embed([text]), dtype=np.float32)[0]


def _restrict(evidence: Sequence[PairEvidence], selected: Sequence[int]) -> List[PairEvidence]:
    keep = set(selected)
    restricted = []
    for pair in evidence:
        chunks = [c for c in pair.chunks if c in keep]
        if chunks:
            restricted.append(PairEvidence(entities=pair.entities, chunks=chunks))
    return restricted


def adaptive_retrieve(
    ctx: QueryContext,
    graph: EntityGraph,
    tree: SummaryTree,
    store: VectorStore,
    index: BiIndex,
    embedder: Embedder,
    options: Optional[RetrievalOptions] = None,
) -> RetrievalResult:
    """
    Pick a retrieval mode for the query and return at most k chunk/node ids.

    Raises:
        IndexNotBuilt: when a global path runs against an empty store
    """
    options = options or RetrievalOptions()
    k = ctx.k
    entities = sorted({e for e in ctx.query_entities if e in graph})
    trace: List[TraceStep] = [TraceStep(step="entities", detail=", ".join(entities) or "none")]

    def global_dense(reason: str) -> RetrievalResult:
        if not options.use_dense_retrieval:
            trace.append(TraceStep(step="dense", detail=f"{reason}; dense retrieval disabled"))
            return RetrievalResult(mode=RetrievalMode.GLOBAL_DENSE, trace=trace, query_entities=entities)
        hits = dense_retrieve(_embed_query(embedder, ctx.query_text), store, tree, k)
        trace.append(TraceStep(step="dense", candidates=len(hits), detail=reason))
        return RetrievalResult(
            mode=RetrievalMode.GLOBAL_DENSE,
            chunks=[node_id for node_id, _ in hits],
            trace=trace,
            query_entities=entities,
        )

    def global_occurrence(reason: str) -> RetrievalResult:
        if not options.use_occurrence_rank:
            return global_dense(f"{reason}; occurrence ranking disabled")
        if options.use_dense_retrieval:
            pool = [node_id for node_id, _ in dense_retrieve(_embed_query(embedder, ctx.query_text), store, tree, 2 * k)]
        else:
            pool = [node.node_id for node in collapsed_nodes(tree)]
            reason = f"{reason}; every tree node ranked without dense retrieval"
        ranked = occurrence_rank(pool, entities, index, tree, k)
        trace.append(TraceStep(step="occurrence_rank", candidates=len(pool), detail=reason))
        return RetrievalResult(
            mode=RetrievalMode.GLOBAL_OCCURRENCE,
            chunks=ranked,
            trace=trace,
            query_entities=entities,
        )

    if options.mode == "dense":
        return global_dense("dense mode forced")
    if not entities:
        return global_dense("no query entity is a graph vertex")

    h = ctx.h
    pairs = graph_filter(graph, entities, h, options.use_graph_filter)
    trace.append(TraceStep(step="graph_filter", h=h, pairs=len(pairs)))
    if not pairs:
        return global_occurrence("no entity pair within the hop threshold")

    candidates, evidence = index_mapping(pairs, index)
    trace.append(TraceStep(step="index_mapping", h=h, pairs=len(pairs), candidates=len(candidates)))
    if not candidates:
        return global_occurrence("fallback: no chunk holds both entities of any pair")

    previous_candidates, previous_evidence = candidates, evidence
    while options.use_graph_filter and len(candidates) > ctx.loop_threshold and h > 0:
        previous_candidates, previous_evidence = candidates, evidence
        h -= 1
        pairs = graph_filter(graph, entities, h)
        candidates, evidence = index_mapping(pairs, index)
        trace.append(TraceStep(step="shrink", h=h, pairs=len(pairs), candidates=len(candidates)))

    if not candidates:
        mode = RetrievalMode.LOCAL_ENTITY_AWARE
        pool, evidence = previous_candidates, previous_evidence
    else:
        mode = RetrievalMode.LOCAL
        pool = candidates

    if mode == RetrievalMode.LOCAL and len(pool) <= k:
        selected = list(pool)
        detail = "all candidates"
    elif options.use_entity_aware_rank:
        selected = entity_aware_rank(pool, entities, index, k)
        detail = "entity-aware ranking"
    else:
        selected = sorted(pool)[:k]
        detail = "document order (entity-aware ranking disabled)"
    trace.append(TraceStep(step="select", h=h, candidates=len(pool), detail=detail))

    return RetrievalResult(
        mode=mode,
        chunks=selected,
        pairs=_restrict(evidence, selected),
        trace=trace,
        query_entities=entities,
    )


# =============================================================================
# QUERY ENGINE
# =============================================================================

def resolve_query_entities(question: str, extractor: EntityExtractor, graph: EntityGraph) -> List[str]:
    """Canonical entities of the question that are graph vertices, in order of appearance."""
    found: Dict[str, None] = {}
    for sentence in split_sentences(question) or [question]:
        for occ in extract_entities(sentence, extractor):
            found.setdefault(occ.canonical)
    valid = [e for e in found if e in graph]
    ignored = [e for e in found if e not in graph]
    if ignored:
        logger.debug(f"Ignoring query entities missing from the graph: {ignored}")
    return valid


class QueryEngine:
    """
    Retrieval over a loaded index artifact.

    Safe to share between threads: retrieval only reads the artifact.
    """

    def __init__(
        self,
        artifact: IndexArtifact,
        extractor: EntityExtractor,
        embedder: Embedder,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    ):
        self.artifact = artifact
        self.extractor = extractor
        self.embedder = embedder
        self.tokenizer = tokenizer

    def context(self, question: str, k: int = 8, h: int = 4, loop_threshold: int = 25) -> QueryContext:
        entities = resolve_query_entities(question, self.extractor, self.artifact.graph)
        return QueryContext(query_text=question, query_entities=entities, k=k, h=h, loop_threshold=loop_threshold)

    def node_text(self, node_id: int) -> str:
        return self.artifact.tree.nodes[node_id].text

    def format(self, result: RetrievalResult) -> str:
        if result.mode in LOCAL_MODES:
            blocks = build_blocks(result.pairs, self.artifact.chunks, self.artifact.params.overlap, self.tokenizer)
            return render(blocks)
        return render_plain([self.node_text(i) for i in result.chunks])

    def retrieve(
        self,
        question: str,
        k: int = 8,
        h: int = 4,
        loop_threshold: int = 25,
        options: Optional[RetrievalOptions] = None,
    ) -> RetrievalResult:
        started = time.perf_counter()
        ctx = self.context(question, k=k, h=h, loop_threshold=loop_threshold)
        result = adaptive_retrieve(
            ctx,
            self.artifact.graph,
            self.artifact.tree,
            self.artifact.store,
            self.artifact.index,
            self.embedder,
            options,
        )
        result.formatted = self.format(result)
        result.retrieval_ms = (time.perf_counter() - started) * 1000.0
        logger.debug(f"Query answered in {result.retrieval_ms:.2f} ms via {result.mode.value}")
        return result
