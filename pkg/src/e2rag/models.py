# =============================================================================
# E2RAG DATA MODELS
# Pydantic models shared by indexing, retrieval, persistence and the CLI
# =============================================================================
"""
Data models for the e2rag index and retrieval results.

These Pydantic models define the structure for:
- Token streams and chunks produced by the chunker
- Summary-tree nodes
- Entity records and the bidirectional entity/chunk indexes
- Query contexts, retrieval results and evidence blocks
- Build parameters, build statistics and evaluation items
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator


# =============================================================================
# CHUNKING
# =============================================================================

class TokenStream(BaseModel):
    """Tokens of one document, in source order."""
    tokens: List[str]
    spaces: List[bool] = Field(
        ...,
        description="spaces[i] is True when whitespace preceded tokens[i] in the source"
    )
    provenance: str = "<memory>"

    def __len__(self) -> int:
        return len(self.tokens)


class Chunk(BaseModel):
    chunk_id: int = Field(..., ge=0)
    token_span: Tuple[int, int] = Field(..., description="Half-open [start, end) token interval")
    text: str
    token_count: int = Field(..., ge=1)

    @property
    def start(self) -> int:
        return self.token_span[0]

    @property
    def end(self) -> int:
        return self.token_span[1]


# =============================================================================
# SUMMARY TREE
# =============================================================================

class TreeNode(BaseModel):
    node_id: int
    level: int = Field(..., ge=0, description="0 = leaf chunk, otherwise the level the summary was built at")
    children: List[int] = Field(default_factory=list)
    text: str
    embedding_ref: int

    @property
    def is_leaf(self) -> bool:
        return self.level == 0


class SummaryTree(BaseModel):
    """
    Leaves are chunks (node_id == chunk_id), summaries follow in build order.

    `levels[l]` lists the node ids making up level l in document order. A
    node promoted without summarization keeps its id and reappears in the
    next level, so `levels[l]` may hold nodes whose `level` is below l.
    """
    nodes: List[TreeNode]
    levels: List[List[int]]
    group_size: int
    summarizer_calls: int = 0

    @property
    def leaf_count(self) -> int:
        return len(self.levels[0]) if self.levels else 0

    @property
    def summary_count(self) -> int:
        return len(self.nodes) - self.leaf_count

    @property
    def roots(self) -> List[int]:
        return list(self.levels[-1]) if self.levels else []


# =============================================================================
# ENTITIES AND INDEXES
# =============================================================================

class Entity(BaseModel):
    canonical: str = Field(..., min_length=1)
    surface_forms: List[str] = Field(default_factory=list)


class EntityOccurrence(BaseModel):
    """One entity found in a piece of text, with how often it occurred."""
    canonical: str
    count: int = Field(1, ge=1)
    surface_forms: List[str] = Field(default_factory=list)


class BiIndex(BaseModel):
    """
    The two one-to-many maps linking entities and chunks.

    entity_to_chunks: canonical -> ascending chunk ids
    chunk_to_entity_freq: chunk id -> {canonical: occurrence count}
    """
    entity_to_chunks: Dict[str, List[int]] = Field(default_factory=dict)
    chunk_to_entity_freq: Dict[int, Dict[str, int]] = Field(default_factory=dict)

    def chunks_of(self, entity: str) -> List[int]:
        return self.entity_to_chunks.get(entity, [])

    def frequencies(self, chunk_id: int) -> Dict[str, int]:
        return self.chunk_to_entity_freq.get(chunk_id, {})


# =============================================================================
# RETRIEVAL
# =============================================================================

class RetrievalMode(str, Enum):
    """The four ways a query can be answered."""
    GLOBAL_DENSE = "GlobalDense"
    GLOBAL_OCCURRENCE = "GlobalOccurrence"
    LOCAL = "Local"
    LOCAL_ENTITY_AWARE = "LocalEntityAware"


class QueryContext(BaseModel):
    query_text: str
    query_entities: List[str] = Field(default_factory=list)
    k: int = Field(8, ge=1)
    h: int = Field(4, ge=1)
    loop_threshold: int = Field(25, ge=1)

    @model_validator(mode="after")
    def check_threshold(self):
        if self.loop_threshold < self.k:
            raise ValueError("loop_threshold must be >= k")
        return self


class PairEvidence(BaseModel):
    entities: Tuple[str, str]
    chunks: List[int] = Field(default_factory=list)


class TraceStep(BaseModel):
    step: str
    h: Optional[int] = None
    pairs: int = 0
    candidates: int = 0
    detail: str = ""


class RetrievalResult(BaseModel):
    mode: RetrievalMode
    chunks: List[int] = Field(
        default_factory=list,
        description="Selected node ids; leaves share ids with chunks, global modes may return summaries"
    )
    pairs: List[PairEvidence] = Field(default_factory=list)
    trace: List[TraceStep] = Field(default_factory=list)
    query_entities: List[str] = Field(default_factory=list)
    formatted: str = ""
    retrieval_ms: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def check_local_pairs(self):
        if len(set(self.chunks)) != len(self.chunks):
            raise ValueError("retrieved chunks must be distinct")
        if self.mode in (RetrievalMode.LOCAL, RetrievalMode.LOCAL_ENTITY_AWARE) and not self.pairs:
            raise ValueError(f"{self.mode.value} results need at least one entity pair")
        return self


class EvidenceBlock(BaseModel):
    entity_group: List[str]
    chunk_ids: List[int]
    merged_text: str = ""

    @field_validator("chunk_ids")
    @classmethod
    def ascending(cls, v: List[int]) -> List[int]:
        if v != sorted(set(v)):
            raise ValueError("chunk_ids must be strictly ascending")
        return v


# =============================================================================
# BUILD METADATA
# =============================================================================

class StageTimings(BaseModel):
    chunking_ms: float = Field(0.0, ge=0)
    tree_ms: float = Field(0.0, ge=0)
    graph_ms: float = Field(0.0, ge=0)
    embed_ms: float = Field(0.0, ge=0)
    total_index_ms: float = Field(0.0, ge=0)
    retrieval_ms: Optional[float] = Field(None, ge=0)


class BuildParams(BaseModel):
    chunk_size: int = 1200
    overlap: int = 100
    group_size: int = 8
    grouping: str = "carry"
    build_to_root: bool = False
    summarizer: str = "offline"
    embedder: str = "offline"
    extractor: str = "rule-based"
    provenance: str = "<memory>"


class BuildStats(BaseModel):
    summarizer_calls: int = 0
    predicted_summarizer_calls: int = 0
    embedder_calls: int = 0
    timings: StageTimings = Field(default_factory=StageTimings)


# =============================================================================
# EVALUATION
# =============================================================================

class QAItem(BaseModel):
    """One line of a QA file: close-ended (answer) or multiple choice (choices + gold)."""
    question: str = Field(..., min_length=1)
    answer: Optional[str] = None
    choices: Optional[List[str]] = None
    gold: Optional[Union[int, str]] = None

    @model_validator(mode="after")
    def check_shape(self):
        if self.choices:
            if self.gold is None:
                raise ValueError("multiple-choice items need a gold choice")
            if isinstance(self.gold, int) and not 0 <= self.gold < len(self.choices):
                raise ValueError("gold index out of range")
            if isinstance(self.gold, str) and self.gold not in self.choices:
                raise ValueError("gold text is not one of the choices")
        elif not self.answer:
            raise ValueError("items need either an answer or choices with gold")
        return self

    @property
    def gold_index(self) -> Optional[int]:
        if not self.choices:
            return None
        if isinstance(self.gold, int):
            return self.gold
        return self.choices.index(self.gold)
