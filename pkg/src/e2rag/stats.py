# src/e2rag/stats.py
"""Index statistics and the indexing-time scaling experiment."""

import logging
import math
import time
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from e2rag.models import BuildParams, BuildStats
from e2rag.pipeline import build_index
from e2rag.services import offline_backends
from e2rag.storage import IndexArtifact
from e2rag.synthetic import generate_document

logger = logging.getLogger(__name__)

STATS_SCHEMA_VERSION = 1


class IndexStats(BaseModel):
    schema_version: int = STATS_SCHEMA_VERSION
    format_version: int
    params: BuildParams
    chunks: int
    tree_nodes: int
    nodes_per_level: List[int]
    entities: int
    edges: int
    total_edge_weight: int
    call_bound: int = Field(..., description="ceil(n / (g - 1)) for the build's n and g")
    build: BuildStats


def call_bound(n: int, g: int) -> int:
    return math.ceil(n / (g - 1))


def index_stats(artifact: IndexArtifact) -> IndexStats:
    return IndexStats(
        format_version=artifact.format_version,
        params=artifact.params,
        chunks=len(artifact.chunks),
        tree_nodes=len(artifact.tree.nodes),
        nodes_per_level=[len(level) for level in artifact.tree.levels],
        entities=len(artifact.graph),
        edges=artifact.graph.nx.number_of_edges(),
        total_edge_weight=artifact.graph.total_weight(),
        call_bound=call_bound(len(artifact.chunks), artifact.tree.group_size),
        build=artifact.stats,
    )


# =============================================================================
# SCALING
# =============================================================================

class LinearFit(BaseModel):
    slope: float
    intercept: float
    r2: float


class ScalingPoint(BaseModel):
    tokens: int
    seconds: float
    chunks: int
    summarizer_calls: int


class ScalingReport(BaseModel):
    schema_version: int = STATS_SCHEMA_VERSION
    points: List[ScalingPoint]
    fit: Optional[LinearFit] = None


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Least-squares line through (x, y) with its coefficient of determination."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2:
        raise ValueError("a linear fit needs at least two points")
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (slope * x + intercept)) ** 2))
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - residual / total if total > 0 else 1.0
    return LinearFit(slope=float(slope), intercept=float(intercept), r2=r2)


def scaling_run(sizes: Sequence[int], params: Optional[BuildParams] = None, seed: int = 0) -> ScalingReport:
    """Index synthetic documents of the given token counts with offline backends."""
    params = params or BuildParams()
    points: List[ScalingPoint] = []
    for size in sizes:
        text = generate_document(size, n_entities=max(50, size // 200), seed=seed)
        backends = offline_backends()
        started = time.perf_counter()
        artifact = build_index(text, params.model_copy(update={"provenance": f"synthetic-{size}"}), backends)
        seconds = time.perf_counter() - started
        points.append(ScalingPoint(
            tokens=size,
            seconds=seconds,
            chunks=len(artifact.chunks),
            summarizer_calls=artifact.stats.summarizer_calls,
        ))
        logger.info(f"📈 {size} tokens indexed in {seconds:.2f} s")
    fit = linear_fit([p.tokens for p in points], [p.seconds for p in points]) if len(points) >= 2 else None
    return ScalingReport(points=points, fit=fit)


def parse_sizes(raw: str) -> List[int]:
    sizes: List[int] = []
    for part in raw.split(","):
        part = part.strip().lower().replace("_", "")
        if not part:
            continue
        multiplier = 1
        if part.endswith("k"):
            multiplier, part = 1_000, part[:-1]
        elif part.endswith("m"):
            multiplier, part = 1_000_000, part[:-1]
        value = int(float(part) * multiplier)
        if value <= 0:
            raise ValueError(f"sizes must be positive, got {value}")
        sizes.append(value)
    return sizes
