# tests/conftest.py
"""Shared fixtures: toy corpora, offline backends and built indexes."""

from typing import List

import pytest

from e2rag.models import BuildParams, Chunk
from e2rag.pipeline import build_index
from e2rag.retrieval import QueryEngine
from e2rag.services import offline_backends

# Every paragraph is exactly 8 tokens, so with chunk_size=8 and overlap=0
# paragraph i is chunk i.
FILLER = "The river stood quietly and then rested."
HOUSE_CUP_PARAGRAPHS = [
    FILLER,
    FILLER,
    "Slytherin won the House Cup again today.",
    FILLER,
    "Slytherin lost the match to Gryffindor badly.",
    FILLER,
    FILLER,
    "Slytherin won the House Cup again today.",
    FILLER,
    FILLER,
]
HOUSE_CUP_TEXT = " ".join(HOUSE_CUP_PARAGRAPHS)
HOUSE_CUP_PARAMS = BuildParams(chunk_size=8, overlap=0, group_size=3, provenance="house-cup")


def make_chunks(texts: List[str]) -> List[Chunk]:
    return [
        Chunk(chunk_id=i, token_span=(i, i + 1), text=text, token_count=1)
        for i, text in enumerate(texts)
    ]


@pytest.fixture
def backends():
    return offline_backends(dimension=64)


@pytest.fixture
def house_cup_artifact():
    return build_index(HOUSE_CUP_TEXT, HOUSE_CUP_PARAMS, offline_backends(dimension=64))


@pytest.fixture
def house_cup_engine(house_cup_artifact):
    fresh = offline_backends(dimension=64)
    return QueryEngine(house_cup_artifact, fresh.extractor, fresh.embedder)


@pytest.fixture
def house_cup_file(tmp_path):
    path = tmp_path / "house_cup.txt"
    path.write_text(HOUSE_CUP_TEXT, encoding="utf-8")
    return path
