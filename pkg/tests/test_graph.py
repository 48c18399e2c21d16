# tests/test_graph.py
import random
from collections import Counter
from itertools import combinations

import pytest

from conftest import make_chunks
from e2rag.chunker import split_into_chunks, tokenize
from e2rag.graph import (
    EntityGraph,
    asymmetries,
    build_biindex,
    build_chunk_subgraph,
    build_entity_graph,
    merge_graphs,
    split_sentences,
)
from e2rag.models import BiIndex
from e2rag.services import RuleBasedExtractor
from e2rag.synthetic import generate_document

EXTRACTOR = RuleBasedExtractor()


def names(occurrences):
    return [occ.canonical for occ in occurrences]


def test_split_sentences_keeps_abbreviations_together():
    text = "Dr. Smith arrived. He left! Why? "
    assert split_sentences(text) == ["Dr. Smith arrived. ", "He left! ", "Why? "]


def test_split_sentences_round_trips_and_handles_empty():
    text = "First one. Second one?! third without end"
    assert "".join(split_sentences(text)) == text
    assert split_sentences("") == []


def test_extractor_finds_capitalized_runs():
    found = EXTRACTOR.extract("Harry Potter met Hermione Granger at Hogwarts.")
    assert names(found) == ["harry potter", "hermione granger", "hogwarts"]


def test_extractor_strips_sentence_initial_stopwords():
    assert names(EXTRACTOR.extract("Has Slytherin won the House Cup?")) == ["slytherin", "house cup"]
    assert names(EXTRACTOR.extract("I saw Ron.")) == ["ron"]
    assert names(EXTRACTOR.extract("it rained all day")) == []


def test_extractor_uses_noun_lexicon():
    extractor = RuleBasedExtractor(noun_lexicon={"wand", "invisibility cloak"})
    found = extractor.extract("the old wand lay under an invisibility cloak")
    assert names(found) == ["wand", "invisibility cloak"]


def test_extractor_counts_repeats_and_surface_forms():
    found = EXTRACTOR.extract("Alice saw Bob and ALICE.")
    assert names(found) == ["alice", "bob"]
    assert found[0].count == 2
    assert found[0].surface_forms == ["ALICE", "Alice"]


def test_chunk_subgraph_counts_sentences():
    chunk = make_chunks(["Alice met Bob. Alice and Bob met Carol. Dave slept."])[0]
    graph, freqs = build_chunk_subgraph(chunk, EXTRACTOR)
    assert graph.weight("alice", "bob") == 2
    assert graph.weight("alice", "carol") == 1
    assert graph.weight("bob", "carol") == 1
    assert graph.weight("alice", "dave") == 0
    assert "dave" in graph
    assert dict(freqs) == {"alice": 2, "bob": 2, "carol": 1, "dave": 1}


def test_repeated_pair_in_one_sentence_counts_once():
    chunk = make_chunks(["Alice saw Bob and Alice."])[0]
    graph, freqs = build_chunk_subgraph(chunk, EXTRACTOR)
    assert graph.weight("alice", "bob") == 1
    assert freqs["alice"] == 2


def test_self_loops_are_ignored():
    graph = EntityGraph()
    graph.add_cooccurrence("a", "a")
    assert graph.edges() == []


def random_fragment(rng: random.Random) -> EntityGraph:
    fragment = EntityGraph()
    vocab = [f"e{i}" for i in range(12)]
    for _ in range(rng.randint(0, 15)):
        a, b = rng.sample(vocab, 2)
        fragment.add_cooccurrence(a, b, rng.randint(1, 3))
    for name in rng.sample(vocab, 3):
        fragment.add_entity(name, {name.upper()})
    return fragment


@pytest.mark.parametrize("seed", range(10))
def test_merge_is_order_independent(seed):
    rng = random.Random(seed)
    fragments = [random_fragment(rng) for _ in range(6)]
    forward = merge_graphs(fragments)
    shuffled = list(fragments)
    rng.shuffle(shuffled)
    assert merge_graphs(shuffled) == forward
    assert forward.total_weight() == sum(f.total_weight() for f in fragments)


def test_build_entity_graph_and_index():
    chunks = make_chunks([
        "Alice met Bob.",
        "The river stood still.",
        "Bob visited Carol. Alice stayed home.",
    ])
    graph, index = build_entity_graph(chunks, EXTRACTOR)
    assert graph.vertices() == ["alice", "bob", "carol"]
    assert graph.edges() == [("alice", "bob", 1), ("bob", "carol", 1)]
    assert index.entity_to_chunks == {"alice": [0, 2], "bob": [0, 2], "carol": [2]}
    assert 1 not in index.chunk_to_entity_freq
    assert index.frequencies(2) == {"alice": 1, "bob": 1, "carol": 1}
    assert list(asymmetries(index)) == []


def test_biindex_drops_zero_counts_and_empty_chunks():
    chunks = make_chunks(["x", "y", "z"])
    index = build_biindex(chunks, [{"b": 2, "a": 1}, {"a": 0}, {"b": 1}])
    assert index.entity_to_chunks == {"a": [0], "b": [0, 2]}
    assert index.chunk_to_entity_freq == {0: {"a": 1, "b": 2}, 2: {"b": 1}}
    assert list(asymmetries(index)) == []


def test_biindex_needs_one_map_per_chunk():
    with pytest.raises(ValueError):
        build_biindex(make_chunks(["x", "y"]), [{}])


def test_asymmetries_detects_broken_links():
    index = BiIndex(
        entity_to_chunks={"a": [0, 1]},
        chunk_to_entity_freq={0: {"a": 1}, 1: {}, 2: {"a": 3}},
    )
    problems = list(asymmetries(index))
    assert len(problems) == 2
    assert any("chunk 1" in p for p in problems)
    assert any("chunk 2" in p for p in problems)


# =============================================================================
# WHOLE-DOCUMENT PROPERTIES
# =============================================================================

def rescan(chunks):
    """Per-chunk entity counts and per-sentence pair weights, recounted from the chunk texts."""
    counts = {}
    pairs = Counter()
    for chunk in chunks:
        found = Counter()
        for sentence in split_sentences(chunk.text):
            occurrences = EXTRACTOR.extract(sentence)
            for occ in occurrences:
                found[occ.canonical] += occ.count
            pairs.update(combinations(sorted({occ.canonical for occ in occurrences}), 2))
        counts[chunk.chunk_id] = found
    return counts, pairs


@pytest.mark.parametrize("seed", range(6))
def test_index_matches_a_rescan_of_the_chunks(seed):
    text = generate_document(800, n_entities=12, mention_rate=0.4, seed=seed)
    chunks = split_into_chunks(tokenize(text), chunk_size=60, overlap=15)
    graph, index = build_entity_graph(chunks, EXTRACTOR)
    counts, _ = rescan(chunks)

    for chunk_id, found in counts.items():
        assert index.frequencies(chunk_id) == dict(found)
        for entity in graph.vertices():
            assert (chunk_id in index.entity_to_chunks[entity]) == (found[entity] > 0)
    assert set(index.entity_to_chunks) == set(graph.vertices())
    assert list(asymmetries(index)) == []


@pytest.mark.parametrize("seed", range(6))
def test_edge_weights_are_sentence_pair_counts(seed):
    text = generate_document(800, n_entities=12, mention_rate=0.4, seed=seed)
    chunks = split_into_chunks(tokenize(text), chunk_size=60, overlap=15)
    graph, _ = build_entity_graph(chunks, EXTRACTOR)
    _, pairs = rescan(chunks)

    assert graph.edges() == sorted((a, b, n) for (a, b), n in pairs.items())
    assert graph.total_weight() == sum(pairs.values())


def test_entity_in_the_overlap_is_indexed_in_both_chunks():
    text = "one Ron three four five six Hermione seven eight nine ten eleven"
    chunks = split_into_chunks(tokenize(text), chunk_size=8, overlap=4)
    assert [c.token_span for c in chunks] == [(0, 8), (4, 12)]

    graph, index = build_entity_graph(chunks, EXTRACTOR)
    assert index.entity_to_chunks == {"hermione": [0, 1], "ron": [0]}
    assert index.frequencies(1) == {"hermione": 1}
    assert graph.edges() == [("hermione", "ron", 1)]
