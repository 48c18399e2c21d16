# tests/test_tree.py
import math
import random

import numpy as np
import pytest

from conftest import make_chunks
from e2rag.errors import (
    BackendError,
    EmbeddingDimensionMismatch,
    IndexingFailed,
    IndexNotBuilt,
    InvalidTreeConfig,
    NodeNotFound,
)
from e2rag.services import CallCounter, HashingEmbedder, OfflineSummarizer
from e2rag.tree import (
    VectorStore,
    build_summary_tree,
    collapsed_nodes,
    embed_all,
    get_node,
    group_level,
    leaf_range,
    predict_summarizer_calls,
    subtree_leaf_ids,
)


def carry_oracle(n: int, g: int) -> int:
    calls, m = 0, n
    while m > g:
        calls += m // g
        m = m // g + m % g
    return calls


def build(n: int, g: int, **kwargs):
    counter = CallCounter()
    tree = build_summary_tree(
        make_chunks([f"chunk number {i}" for i in range(n)]),
        g,
        OfflineSummarizer(counter=counter),
        max_workers=2,
        **kwargs,
    )
    return tree, counter


def test_group_level_stops_when_few_nodes_remain():
    assert group_level(1, 3) is None
    assert group_level(3, 3) is None
    assert group_level(3, 3, build_to_root=True) == [(0, 3)]


def test_group_level_carry_promotes_the_remainder():
    assert group_level(8, 3) == [(0, 3), (3, 6), (6, 7), (7, 8)]


def test_group_level_ceil_summarizes_partial_tail():
    assert group_level(8, 3, grouping="ceil") == [(0, 3), (3, 6), (6, 8)]
    assert group_level(7, 3, grouping="ceil") == [(0, 3), (3, 6), (6, 7)]


def test_nine_chunks_group_three():
    tree, counter = build(9, 3)
    assert tree.summarizer_calls == 3
    assert counter.summarizer_calls == 3
    assert [len(level) for level in tree.levels] == [9, 3]
    assert len(tree.nodes) == 12


def test_twenty_seven_chunks_group_three():
    tree, _ = build(27, 3)
    assert tree.summarizer_calls == 12
    assert [len(level) for level in tree.levels] == [27, 9, 3]
    assert tree.summarizer_calls <= math.ceil(27 / 2)


def test_single_chunk_needs_no_summary():
    tree, counter = build(1, 4)
    assert tree.summarizer_calls == 0
    assert counter.summarizer_calls == 0
    assert tree.levels == [[0]]
    assert tree.roots == [0]


def test_build_to_root_ends_with_one_root():
    tree, _ = build(9, 3, build_to_root=True)
    assert tree.summarizer_calls == 4
    assert len(tree.roots) == 1
    assert subtree_leaf_ids(tree, tree.roots[0]) == list(range(9))


def test_promoted_node_is_carried_without_a_copy():
    tree, _ = build(10, 3)
    assert tree.summarizer_calls == 4
    assert len(tree.nodes) == 14
    assert tree.levels[1] == [10, 11, 12, 9]
    assert tree.levels[2] == [13, 9]
    assert tree.nodes[13].children == [10, 11, 12]
    assert all(len(node.children) >= 2 for node in tree.nodes if not node.is_leaf)
    assert len({node.text for node in tree.nodes}) == len(tree.nodes)


def test_leaves_share_ids_with_chunks():
    tree, _ = build(5, 2)
    for i in range(5):
        assert tree.nodes[i].is_leaf
        assert tree.nodes[i].text == f"chunk number {i}"


def test_ceil_grouping_can_exceed_the_carry_bound():
    assert predict_summarizer_calls(122, 3, grouping="ceil") == 62
    assert predict_summarizer_calls(122, 3, grouping="carry") == 60
    assert math.ceil(122 / 2) == 61


def test_summarizer_call_bound_over_random_builds():
    rng = random.Random(1234)
    for _ in range(200):
        n, g = rng.randint(1, 500), rng.randint(2, 16)
        tree, counter = build(n, g)
        expected = carry_oracle(n, g)
        assert tree.summarizer_calls == expected
        assert counter.summarizer_calls == expected
        assert predict_summarizer_calls(n, g) == expected
        assert expected <= math.ceil(n / (g - 1))
        assert tree.summary_count == expected
        for level in tree.levels:
            covered = [c for node_id in level for c in subtree_leaf_ids(tree, node_id)]
            assert covered == list(range(n))


def test_subtree_leaves_are_contiguous():
    tree, _ = build(9, 3)
    assert subtree_leaf_ids(tree, 9) == [0, 1, 2]
    assert subtree_leaf_ids(tree, 11) == [6, 7, 8]
    assert subtree_leaf_ids(tree, 4) == [4]


def test_leaf_range_follows_first_and_last_children():
    tree, _ = build(10, 3)
    assert leaf_range(tree, 13) == (0, 8)
    assert leaf_range(tree, 12) == (6, 8)
    assert leaf_range(tree, 9) == (9, 9)
    assert leaf_range(tree, 5) == (5, 5)


def test_collapsed_nodes_cover_every_level():
    tree, _ = build(10, 3)
    nodes = collapsed_nodes(tree)
    assert [n.node_id for n in nodes] == list(range(14))
    assert {n.level for n in nodes} == {0, 1, 2}


def test_group_size_below_two_is_rejected():
    with pytest.raises(InvalidTreeConfig):
        build(5, 1)


def test_unknown_node():
    tree, _ = build(3, 2)
    with pytest.raises(NodeNotFound):
        get_node(tree, 99)


class FailingSummarizer:
    name = "failing"

    def __init__(self, fail_after: int):
        self.counter = CallCounter()
        self.fail_after = fail_after

    def summarize(self, texts):
        if self.counter.summarizer_calls >= self.fail_after:
            raise BackendError("endpoint down")
        self.counter.record_summarizer_call()
        return "summary"


def test_summarizer_failure_reports_progress():
    with pytest.raises(IndexingFailed) as info:
        build_summary_tree(make_chunks([f"c{i}" for i in range(27)]), 3, FailingSummarizer(fail_after=9), max_workers=1)
    assert info.value.progress["stage"] == "tree"
    assert info.value.progress["levels_completed"] == 1
    assert info.value.progress["summarizer_calls"] == 9
    assert "progress" in str(info.value)


def test_embed_all_gives_one_unit_row_per_node():
    tree, _ = build(9, 3)
    counter = CallCounter()
    store = embed_all(tree, HashingEmbedder(counter=counter, dimension=32), batch_size=5)
    assert len(store) == 12
    assert store.dimension == 32
    assert counter.embedder_calls == 3
    np.testing.assert_allclose(np.linalg.norm(store.vectors, axis=1), 1.0, rtol=1e-5)


def test_vector_store_errors():
    with pytest.raises(IndexNotBuilt):
        VectorStore(np.zeros((0, 4))).cosine_scores(np.ones(4))
    store = VectorStore(np.eye(3))
    with pytest.raises(EmbeddingDimensionMismatch):
        store.cosine_scores(np.ones(4))


def test_cosine_scores():
    store = VectorStore(np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]]))
    scores = store.cosine_scores(np.array([3.0, 0.0]))
    np.testing.assert_allclose(scores, [1.0, 0.0, 1 / math.sqrt(2)], rtol=1e-6)
