# tests/test_formatter.py
import random

import pytest

from e2rag.chunker import DEFAULT_TOKENIZER, split_into_chunks, tokenize
from e2rag.formatter import build_blocks, dedup_and_group, merge_contiguous, render, render_plain
from e2rag.models import EvidenceBlock, PairEvidence


def test_chunks_shared_by_pairs_appear_once_under_the_union():
    pairs = [
        PairEvidence(entities=("a", "b"), chunks=[1, 2]),
        PairEvidence(entities=("a", "c"), chunks=[2, 3]),
    ]
    blocks = dedup_and_group(pairs)
    assert [(b.entity_group, b.chunk_ids) for b in blocks] == [
        (["a", "b", "c"], [2]),
        (["a", "b"], [1]),
        (["a", "c"], [3]),
    ]


def test_chunks_with_the_same_entities_share_a_block():
    pairs = [PairEvidence(entities=("x", "y"), chunks=[7, 2, 4])]
    blocks = dedup_and_group(pairs)
    assert len(blocks) == 1
    assert blocks[0].chunk_ids == [2, 4, 7]


def test_merge_drops_overlap_between_consecutive_chunks():
    chunks = split_into_chunks(tokenize(" ".join(f"t{i}" for i in range(10))), chunk_size=4, overlap=1)
    assert [c.text for c in chunks] == ["t0 t1 t2 t3", "t3 t4 t5 t6", "t6 t7 t8 t9"]
    assert merge_contiguous([0, 1, 2], chunks, overlap=1) == "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9"
    assert merge_contiguous([0, 2], chunks, overlap=1) == "t0 t1 t2 t3\n---\nt6 t7 t8 t9"
    assert merge_contiguous([1], chunks, overlap=1) == "t3 t4 t5 t6"


def test_render_blocks():
    blocks = [
        EvidenceBlock(entity_group=["a", "b"], chunk_ids=[0], merged_text="first"),
        EvidenceBlock(entity_group=["c", "d"], chunk_ids=[3], merged_text="second"),
    ]
    assert render(blocks) == "a-b:\nfirst\nc-d:\nsecond\n"


def test_build_blocks_fills_merged_text():
    chunks = split_into_chunks(tokenize("Alice met Bob. Bob met Carol. Carol left."), chunk_size=5, overlap=1)
    blocks = build_blocks([PairEvidence(entities=("alice", "bob"), chunks=[0])], chunks, overlap=1)
    assert blocks[0].merged_text == chunks[0].text


def test_render_plain():
    assert render_plain([]) == ""
    assert render_plain(["one", "two"]) == "one\n---\ntwo\n"


def parse_rendered(text):
    """(entity_group, merged_text) per block of a rendered local context."""
    blocks = []
    for line in text.splitlines():
        if line.endswith(":") and line != "---":
            blocks.append((line[:-1].split("-"), []))
        else:
            blocks[-1][1].append(line)
    return [(group, "\n".join(lines)) for group, lines in blocks]


def test_rendered_blocks_parse_back_in_order():
    text = " ".join(f"w{i}." if i % 7 == 6 else f"w{i}" for i in range(40))
    chunks = split_into_chunks(tokenize(text), chunk_size=6, overlap=2)
    pairs = [
        PairEvidence(entities=("hermione", "ron"), chunks=[1, 2, 5]),
        PairEvidence(entities=("harry", "ron"), chunks=[2, 8]),
        PairEvidence(entities=("harry", "hermione"), chunks=[2]),
    ]
    blocks = build_blocks(pairs, chunks, overlap=2)
    parsed = parse_rendered(render(blocks))

    assert parsed == [(b.entity_group, b.merged_text) for b in blocks]
    assert [group for group, _ in parsed] == [["harry", "hermione", "ron"], ["harry", "ron"], ["hermione", "ron"]]
    assert "\n---\n" in parsed[2][1]


def test_three_pairs_sharing_a_chunk():
    pairs = [
        PairEvidence(entities=("a", "b"), chunks=[4, 5]),
        PairEvidence(entities=("b", "c"), chunks=[4]),
        PairEvidence(entities=("a", "c"), chunks=[4, 6]),
    ]
    blocks = dedup_and_group(pairs)
    assert [(b.entity_group, b.chunk_ids) for b in blocks] == [
        (["a", "b", "c"], [4]),
        (["a", "b"], [5]),
        (["a", "c"], [6]),
    ]


@pytest.mark.parametrize("seed", range(8))
def test_grouping_matches_a_per_chunk_union(seed):
    rng = random.Random(seed)
    entities = ["a", "b", "c", "d", "e"]
    pairs = [
        PairEvidence(
            entities=tuple(sorted(rng.sample(entities, 2))),
            chunks=sorted(rng.sample(range(12), rng.randint(1, 4))),
        )
        for _ in range(rng.randint(1, 6))
    ]
    blocks = dedup_and_group(pairs)

    listed = [chunk_id for b in blocks for chunk_id in b.chunk_ids]
    assert sorted(listed) == sorted({c for p in pairs for c in p.chunks})
    for block in blocks:
        assert block.chunk_ids == sorted(block.chunk_ids)
        for chunk_id in block.chunk_ids:
            union = {e for p in pairs if chunk_id in p.chunks for e in p.entities}
            assert block.entity_group == sorted(union)
    keys = [(-len(b.entity_group), b.entity_group) for b in blocks]
    assert keys == sorted(keys)
    assert len({tuple(b.entity_group) for b in blocks}) == len(blocks)


def test_merged_run_equals_the_source_slice():
    text = " ".join(f"w{i}," if i % 5 == 4 else f"w{i}" for i in range(30))
    stream = tokenize(text)
    chunks = split_into_chunks(stream, chunk_size=6, overlap=2)
    start, end = chunks[3].token_span[0], chunks[5].token_span[1]
    assert (start, end) == (12, 26)

    expected = DEFAULT_TOKENIZER.join(stream.tokens[start:end], stream.spaces[start:end])
    assert merge_contiguous([3, 4, 5], chunks, overlap=2) == expected
