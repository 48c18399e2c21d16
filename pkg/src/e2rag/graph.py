# src/e2rag/graph.py
"""
Sentence-level entity co-occurrence graph and the entity/chunk indexes.

Each chunk is scanned independently: entities are extracted per sentence,
every unordered pair of distinct entities in a sentence adds 1 to its edge
weight, and per-chunk occurrence counts feed the bidirectional index. The
per-chunk fragments are then merged into the document graph.
"""

import logging
import re
from collections import Counter
from itertools import combinations
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx

from e2rag.models import BiIndex, Chunk, Entity, EntityOccurrence
from e2rag.services.base import EntityExtractor

logger = logging.getLogger(__name__)

ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "mt", "gen", "col",
    "capt", "lt", "sgt", "rev", "hon", "fr", "e.g", "i.e", "cf", "approx",
    "fig", "no", "inc", "ltd", "co",
})

_BOUNDARY = re.compile(r"[.?!]+\s+")
_TRAILING_WORD = re.compile(r"(\w+(?:\.\w+)*)$")


# =============================================================================
# SENTENCES AND ENTITIES
# =============================================================================

def split_sentences(text: str) -> List[str]:
    """
    Split at [.?!] followed by whitespace; the whitespace stays with the
    preceding sentence so that "".join(result) == text. A single "." after a
    known abbreviation ("Dr.", "e.g.") is not a boundary.
    """
    if not text:
        return []
    sentences: List[str] = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        punct = match.group().rstrip()
        if punct == ".":
            word = _TRAILING_WORD.search(text[start:match.start()])
            if word and word.group(1).lower() in ABBREVIATIONS:
                continue
        sentences.append(text[start:match.end()])
        start = match.end()
    if start < len(text):
        sentences.append(text[start:])
    return sentences


def extract_entities(sentence: str, extractor: EntityExtractor) -> List[EntityOccurrence]:
    return extractor.extract(sentence)


# =============================================================================
# ENTITY GRAPH
# =============================================================================

class EntityGraph:
    """
    Undirected weighted graph over canonical entity names.

    Backed by networkx; each vertex keeps the set of observed surface forms,
    each edge a positive integer weight.
    """

    def __init__(self, graph: Optional[nx.Graph] = None):
        self.nx: nx.Graph = graph if graph is not None else nx.Graph()

    def add_entity(self, canonical: str, surface_forms: Iterable[str] = ()) -> None:
        if not self.nx.has_node(canonical):
            self.nx.add_node(canonical, surface_forms=set())
        self.nx.nodes[canonical]["surface_forms"].update(surface_forms)

    def add_cooccurrence(self, a: str, b: str, weight: int = 1) -> None:
        if a == b:
            return
        self.add_entity(a)
        self.add_entity(b)
        if self.nx.has_edge(a, b):
            self.nx[a][b]["weight"] += weight
        else:
            self.nx.add_edge(a, b, weight=weight)

    def merge(self, other: "EntityGraph") -> None:
        """Unify identical entities and sum the weights of identical edges."""
        for name, data in other.nx.nodes(data=True):
            self.add_entity(name, data.get("surface_forms", ()))
        for a, b, data in other.nx.edges(data=True):
            self.add_cooccurrence(a, b, data["weight"])

    def __contains__(self, canonical: str) -> bool:
        return self.nx.has_node(canonical)

    def __len__(self) -> int:
        return self.nx.number_of_nodes()

    def vertices(self) -> List[str]:
        return sorted(self.nx.nodes)

    def entities(self) -> List[Entity]:
        return [
            Entity(canonical=name, surface_forms=sorted(self.nx.nodes[name]["surface_forms"]))
            for name in self.vertices()
        ]

    def edges(self) -> List[Tuple[str, str, int]]:
        """Edges as (a, b, weight) with a < b, sorted."""
        return sorted(
            (min(a, b), max(a, b), int(data["weight"]))
            for a, b, data in self.nx.edges(data=True)
        )

    def weight(self, a: str, b: str) -> int:
        if self.nx.has_edge(a, b):
            return int(self.nx[a][b]["weight"])
        return 0

    def total_weight(self) -> int:
        return sum(w for _, _, w in self.edges())

    def __eq__(self, other) -> bool:
        if not isinstance(other, EntityGraph):
            return NotImplemented
        return self.entities() == other.entities() and self.edges() == other.edges()


# =============================================================================
# CONSTRUCTION
# =============================================================================

def build_chunk_subgraph(chunk: Chunk, extractor: EntityExtractor) -> Tuple[EntityGraph, Counter]:
    """
    Co-occurrence fragment of one chunk plus its entity frequencies.

    A sentence adds at most 1 to each unordered pair of distinct entities it
    contains, however often they repeat inside it.
    """
    fragment = EntityGraph()
    frequencies: Counter = Counter()
    for sentence in split_sentences(chunk.text):
        occurrences = extract_entities(sentence, extractor)
        for occ in occurrences:
            fragment.add_entity(occ.canonical, occ.surface_forms)
            frequencies[occ.canonical] += occ.count
        distinct = sorted({occ.canonical for occ in occurrences})
        for a, b in combinations(distinct, 2):
            fragment.add_cooccurrence(a, b)
    return fragment, frequencies


def merge_graphs(fragments: Iterable[EntityGraph]) -> EntityGraph:
    merged = EntityGraph()
    for fragment in fragments:
        merged.merge(fragment)
    return merged


def build_biindex(chunks: Sequence[Chunk], frequency_maps: Sequence[Dict[str, int]]) -> BiIndex:
    """Both one-to-many maps from per-chunk frequency maps (aligned with `chunks`)."""
    if len(chunks) != len(frequency_maps):
        raise ValueError("one frequency map per chunk is required")
    entity_to_chunks: Dict[str, List[int]] = {}
    chunk_to_entity_freq: Dict[int, Dict[str, int]] = {}
    for chunk, freqs in sorted(zip(chunks, frequency_maps), key=lambda pair: pair[0].chunk_id):
        present = {e: int(n) for e, n in sorted(freqs.items()) if n > 0}
        if not present:
            continue
        chunk_to_entity_freq[chunk.chunk_id] = present
        for entity in present:
            entity_to_chunks.setdefault(entity, []).append(chunk.chunk_id)
    return BiIndex(
        entity_to_chunks=dict(sorted(entity_to_chunks.items())),
        chunk_to_entity_freq=chunk_to_entity_freq,
    )


def build_entity_graph(chunks: Sequence[Chunk], extractor: EntityExtractor) -> Tuple[EntityGraph, BiIndex]:
    """Graph stage of indexing: fragments per chunk, merged, plus the BiIndex."""
    logger.info(f"🕸️  Extracting entities from {len(chunks)} chunks ({extractor.name})")
    fragments: List[EntityGraph] = []
    frequency_maps: List[Dict[str, int]] = []
    for chunk in chunks:
        fragment, freqs = build_chunk_subgraph(chunk, extractor)
        fragments.append(fragment)
        frequency_maps.append(freqs)
    graph = merge_graphs(fragments)
    index = build_biindex(chunks, frequency_maps)
    logger.info(f"✅ Entity graph built: {len(graph)} entities, {graph.nx.number_of_edges()} edges")
    return graph, index


# =============================================================================
# INDEX CHECKS
# =============================================================================

def asymmetries(index: BiIndex, entities: Optional[Iterable[str]] = None) -> Iterator[str]:
    """Describe every broken link between the two maps (restricted to `entities` if given)."""
    names = list(entities) if entities is not None else list(index.entity_to_chunks)
    wanted = set(names)
    for entity in names:
        for chunk_id in index.entity_to_chunks.get(entity, []):
            if entity not in index.chunk_to_entity_freq.get(chunk_id, {}):
                yield f"{entity!r} lists chunk {chunk_id}, which does not list it"
    for chunk_id, freqs in index.chunk_to_entity_freq.items():
        for entity in freqs:
            if entities is not None and entity not in wanted:
                continue
            if chunk_id not in index.entity_to_chunks.get(entity, []):
                yield f"chunk {chunk_id} lists {entity!r}, which does not list it"
