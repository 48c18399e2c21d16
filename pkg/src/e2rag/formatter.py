# src/e2rag/formatter.py
"""
Evidence formatting.

Local evidence is rendered as "entity1-entity2-...: chunks" blocks:
- a chunk linked to several entity pairs appears once, under the union of
  their entities
- blocks with more entities come first
- consecutive chunks inside a block are merged with their overlap removed;
  gaps are marked with a "---" line
Global results are rendered as plain node texts without headers.
"""

from collections import defaultdict
from typing import Dict, List, Sequence, Set

from e2rag.chunker import DEFAULT_TOKENIZER, Tokenizer
from e2rag.models import Chunk, EvidenceBlock, PairEvidence

SEGMENT_SEPARATOR = "\n---\n"


def dedup_and_group(pairs: Sequence[PairEvidence]) -> List[EvidenceBlock]:
    """Group chunks by the set of entities whose pairs point at them."""
    entities_of: Dict[int, Set[str]] = defaultdict(set)
    for pair in pairs:
        for chunk_id in pair.chunks:
            entities_of[chunk_id].update(pair.entities)

    grouped: Dict[tuple, List[int]] = defaultdict(list)
    for chunk_id in sorted(entities_of):
        grouped[tuple(sorted(entities_of[chunk_id]))].append(chunk_id)

    ordered = sorted(grouped.items(), key=lambda item: (-len(item[0]), item[0]))
    return [EvidenceBlock(entity_group=list(group), chunk_ids=ids) for group, ids in ordered]


def merge_contiguous(
    chunk_ids: Sequence[int],
    chunks: Sequence[Chunk],
    overlap: int,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
) -> str:
    """
    Concatenate runs of consecutive chunk ids, dropping the first `overlap`
    tokens of every chunk after the first in a run.
    """
    segments: List[str] = []
    tokens: List[str] = []
    spaces: List[bool] = []
    previous = None
    for chunk_id in chunk_ids:
        chunk_tokens, chunk_spaces = tokenizer.split(chunks[chunk_id].text)
        if previous is not None and chunk_id == previous + 1:
            tokens.extend(chunk_tokens[overlap:])
            spaces.extend(chunk_spaces[overlap:])
        else:
            if tokens:
                segments.append(tokenizer.join(tokens, spaces))
            tokens, spaces = list(chunk_tokens), list(chunk_spaces)
        previous = chunk_id
    if tokens:
        segments.append(tokenizer.join(tokens, spaces))
    return SEGMENT_SEPARATOR.join(segments)


def build_blocks(
    pairs: Sequence[PairEvidence],
    chunks: Sequence[Chunk],
    overlap: int,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
) -> List[EvidenceBlock]:
    blocks = dedup_and_group(pairs)
    for block in blocks:
        block.merged_text = merge_contiguous(block.chunk_ids, chunks, overlap, tokenizer)
    return blocks


def render(blocks: Sequence[EvidenceBlock]) -> str:
    return "".join(f"{'-'.join(block.entity_group)}:\n{block.merged_text}\n" for block in blocks)


def render_plain(texts: Sequence[str]) -> str:
    """Global-mode context: node texts in retrieval order, separated by '---' lines."""
    if not texts:
        return ""
    return SEGMENT_SEPARATOR.join(texts) + "\n"
