# =============================================================================
# E2RAG INDEX STORAGE
# Versioned single-file container for the complete index artifact
# =============================================================================
"""
Persistence of the index artifact (`.e2idx`).

File layout (all integers little-endian):

    magic        6 bytes   b"E2IDX\\0"
    header_len   u32
    header_crc   u32       CRC32 of the header bytes
    header       JSON      format_version, params, stats, section names, counts
    sections     repeated  u8 name_len | name | u64 payload_len | u32 crc32 | payload

Sections:
    chunks    JSON   [[chunk_id, start, end, text], ...]
    tree      JSON   group_size, summarizer_calls, levels, nodes
    vectors   binary u32 rows | u32 dim | rows*dim float32
    entities  JSON   [[canonical, [surface forms]], ...] sorted; position = entity id
    graph     varint per vertex i: degree to higher ids, then (id delta, weight) pairs
    e2c       varint per entity id: count, then chunk-id deltas
    c2e       varint entry count, then per chunk: id delta, count, (entity-id delta, freq) pairs

Every encoding is sorted, so deterministic builds give byte-identical files.
Loading never needs the source document.
"""

import json
import logging
import os
import struct
import tempfile
import zlib
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from e2rag.errors import CorruptIndex, IndexIOError, VersionMismatch
from e2rag.graph import EntityGraph, asymmetries
from e2rag.models import BiIndex, BuildParams, BuildStats, Chunk, StageTimings, SummaryTree, TreeNode
from e2rag.tree import VectorStore

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = b"E2IDX\x00"
FILE_SUFFIX = ".e2idx"
SECTION_ORDER = ("chunks", "tree", "vectors", "entities", "graph", "e2c", "c2e")
SYMMETRY_SAMPLE = 256


class IndexArtifact(BaseModel):
    """Everything retrieval needs: chunks, tree, vectors, graph, indexes, build metadata."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    format_version: int = FORMAT_VERSION
    params: BuildParams
    chunks: List[Chunk]
    tree: SummaryTree
    store: VectorStore
    graph: EntityGraph
    index: BiIndex
    stats: BuildStats


# =============================================================================
# VARINTS
# =============================================================================

def encode_varints(values: Iterable[int]) -> bytes:
    out = bytearray()
    for value in values:
        if value < 0:
            raise ValueError("varints are unsigned")
        while True:
            byte = value & 0x7F
            value >>= 7
            if value:
                out.append(byte | 0x80)
            else:
                out.append(byte)
                break
    return bytes(out)


class VarintReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self) -> int:
        result = 0
        shift = 0
        while True:
            if self.pos >= len(self.data):
                raise CorruptIndex("varint stream ends mid-value")
            byte = self.data[self.pos]
            self.pos += 1
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7
            if shift > 63:
                raise CorruptIndex("varint longer than 64 bits")

    def done(self) -> bool:
        return self.pos == len(self.data)


# =============================================================================
# SECTION ENCODERS
# =============================================================================

def _json_bytes(value) -> bytes:
    return json.dumps(value, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _encode_sections(artifact: IndexArtifact) -> Dict[str, bytes]:
    entities = artifact.graph.entities()
    entity_ids = {e.canonical: i for i, e in enumerate(entities)}

    graph_values: List[int] = []
    neighbours: Dict[str, List[Tuple[int, int]]] = {e.canonical: [] for e in entities}
    for a, b, weight in artifact.graph.edges():
        neighbours[a].append((entity_ids[b], weight))
    for i, entity in enumerate(entities):
        higher = sorted(neighbours[entity.canonical])
        graph_values.append(len(higher))
        previous = i
        for j, weight in higher:
            graph_values.extend((j - previous, weight))
            previous = j

    e2c_values: List[int] = []
    for entity in entities:
        chunk_ids = artifact.index.entity_to_chunks.get(entity.canonical, [])
        e2c_values.append(len(chunk_ids))
        previous = 0
        for chunk_id in chunk_ids:
            e2c_values.append(chunk_id - previous)
            previous = chunk_id

    c2e_items = sorted(artifact.index.chunk_to_entity_freq.items())
    c2e_values: List[int] = [len(c2e_items)]
    previous_chunk = 0
    for chunk_id, freqs in c2e_items:
        c2e_values.extend((chunk_id - previous_chunk, len(freqs)))
        previous_chunk = chunk_id
        previous_entity = 0
        for entity_id, freq in sorted((entity_ids[e], n) for e, n in freqs.items()):
            c2e_values.extend((entity_id - previous_entity, freq))
            previous_entity = entity_id

    vectors = artifact.store.vectors
    return {
        "chunks": _json_bytes([[c.chunk_id, c.start, c.end, c.text] for c in artifact.chunks]),
        "tree": _json_bytes({
            "group_size": artifact.tree.group_size,
            "summarizer_calls": artifact.tree.summarizer_calls,
            "levels": artifact.tree.levels,
            "nodes": [[n.level, n.children, n.text, n.embedding_ref] for n in artifact.tree.nodes],
        }),
        "vectors": struct.pack("<II", *vectors.shape) + vectors.astype("<f4").tobytes(),
        "entities": _json_bytes([[e.canonical, e.surface_forms] for e in entities]),
        "graph": encode_varints(graph_values),
        "e2c": encode_varints(e2c_values),
        "c2e": encode_varints(c2e_values),
    }


# =============================================================================
# SAVE
# =============================================================================

def save(artifact: IndexArtifact, path: Union[str, Path], record_timings: bool = True) -> None:
    """
    Write the artifact atomically (temp file in the same directory + rename).

    With record_timings=False the wall-clock timings are zeroed so that
    deterministic builds produce byte-identical files.
    """
    path = Path(path)
    stats = artifact.stats.model_copy(deep=True)
    if not record_timings:
        stats.timings = StageTimings()

    sections = _encode_sections(artifact)
    header = _json_bytes({
        "format_version": artifact.format_version,
        "params": artifact.params.model_dump(mode="json"),
        "stats": stats.model_dump(mode="json"),
        "sections": list(SECTION_ORDER),
        "counts": {
            "chunks": len(artifact.chunks),
            "nodes": len(artifact.tree.nodes),
            "entities": len(artifact.graph),
        },
    })

    blob = bytearray(MAGIC)
    blob += struct.pack("<II", len(header), zlib.crc32(header))
    blob += header
    for name in SECTION_ORDER:
        payload = sections[name]
        encoded_name = name.encode("ascii")
        blob += struct.pack("<B", len(encoded_name)) + encoded_name
        blob += struct.pack("<QI", len(payload), zlib.crc32(payload))
        blob += payload

    tmp_name = None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path.parent, prefix=f".{path.name}.", delete=False) as tmp:
            tmp_name = tmp.name
            tmp.write(blob)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp_name, path)
    except OSError as e:
        if tmp_name and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise IndexIOError(f"cannot write index {path}: {e.strerror or e}") from e

    logger.info(f"💾 Saved index to {path} ({len(blob)} bytes)")


# =============================================================================
# LOAD
# =============================================================================

class _Cursor:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptIndex(f"{self.path}: truncated file (need {n} bytes at offset {self.pos})")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode_json(payload: bytes, name: str):
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptIndex(f"section {name!r} is not valid JSON") from e


def load(path: Union[str, Path]) -> IndexArtifact:
    """
    Read and validate an index file.

    Raises:
        IndexIOError: the file cannot be read
        VersionMismatch: the file was written by another format version
        CorruptIndex: truncated data, bad checksums or broken invariants
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise IndexIOError(f"cannot read index {path}: {e.strerror or e}") from e

    cursor = _Cursor(data, path)
    if cursor.take(len(MAGIC)) != MAGIC:
        raise CorruptIndex(f"{path}: not an e2rag index (bad magic)")
    header_len, header_crc = cursor.unpack("<II")
    header_bytes = cursor.take(header_len)
    if zlib.crc32(header_bytes) != header_crc:
        raise CorruptIndex(f"{path}: header checksum mismatch")
    header = _decode_json(header_bytes, "header")

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, this build reads version {FORMAT_VERSION}")

    sections: Dict[str, bytes] = {}
    for expected in header.get("sections", []):
        (name_len,) = cursor.unpack("<B")
        name = cursor.take(name_len).decode("ascii", errors="replace")
        if name != expected:
            raise CorruptIndex(f"{path}: expected section {expected!r}, found {name!r}")
        length, crc = cursor.unpack("<QI")
        payload = cursor.take(length)
        if zlib.crc32(payload) != crc:
            raise CorruptIndex(f"{path}: checksum mismatch in section {name!r}")
        sections[name] = payload
    if cursor.pos != len(data):
        raise CorruptIndex(f"{path}: {len(data) - cursor.pos} trailing bytes")
    missing = set(SECTION_ORDER) - set(sections)
    if missing:
        raise CorruptIndex(f"{path}: missing sections {sorted(missing)}")

    try:
        artifact = _decode_artifact(header, sections)
    except (KeyError, IndexError, TypeError, ValueError, struct.error) as e:
        raise CorruptIndex(f"{path}: malformed index contents ({e})") from e

    _validate(artifact, path)
    logger.info(f"📂 Loaded index {path}: {len(artifact.chunks)} chunks, {len(artifact.graph)} entities")
    return artifact


def _decode_artifact(header: dict, sections: Dict[str, bytes]) -> IndexArtifact:
    chunks = [
        Chunk(chunk_id=cid, token_span=(start, end), text=text, token_count=end - start)
        for cid, start, end, text in _decode_json(sections["chunks"], "chunks")
    ]

    raw_tree = _decode_json(sections["tree"], "tree")
    tree = SummaryTree(
        nodes=[
            TreeNode(node_id=i, level=level, children=children, text=text, embedding_ref=ref)
            for i, (level, children, text, ref) in enumerate(raw_tree["nodes"])
        ],
        levels=raw_tree["levels"],
        group_size=raw_tree["group_size"],
        summarizer_calls=raw_tree["summarizer_calls"],
    )

    vector_bytes = sections["vectors"]
    rows, dim = struct.unpack_from("<II", vector_bytes)
    if len(vector_bytes) != 8 + rows * dim * 4:
        raise CorruptIndex("vector section length does not match its shape")
    vectors = np.frombuffer(vector_bytes, dtype="<f4", offset=8).reshape(rows, dim).astype(np.float32)
    if not np.all(np.isfinite(vectors)):
        raise CorruptIndex("vector section holds non-finite values")
    store = VectorStore(vectors)

    raw_entities = _decode_json(sections["entities"], "entities")
    names = [name for name, _ in raw_entities]
    if names != sorted(set(names)):
        raise CorruptIndex("entity table is not sorted and unique")
    graph = EntityGraph()
    for name, surface_forms in raw_entities:
        graph.add_entity(name, surface_forms)

    reader = VarintReader(sections["graph"])
    for i in range(len(names)):
        position = i
        for _ in range(reader.read()):
            position += reader.read()
            weight = reader.read()
            if position >= len(names) or weight <= 0 or position == i:
                raise CorruptIndex("graph section references an invalid edge")
            graph.add_cooccurrence(names[i], names[position], weight)
    if not reader.done():
        raise CorruptIndex("graph section has trailing data")

    entity_to_chunks: Dict[str, List[int]] = {}
    reader = VarintReader(sections["e2c"])
    for name in names:
        chunk_ids: List[int] = []
        position = 0
        for _ in range(reader.read()):
            position += reader.read()
            chunk_ids.append(position)
        if chunk_ids:
            entity_to_chunks[name] = chunk_ids
    if not reader.done():
        raise CorruptIndex("e2c section has trailing data")

    chunk_to_entity_freq: Dict[int, Dict[str, int]] = {}
    reader = VarintReader(sections["c2e"])
    chunk_id = 0
    for _ in range(reader.read()):
        chunk_id += reader.read()
        freqs: Dict[str, int] = {}
        entity_id = 0
        for _ in range(reader.read()):
            entity_id += reader.read()
            freqs[names[entity_id]] = reader.read()
        chunk_to_entity_freq[chunk_id] = freqs
    if not reader.done():
        raise CorruptIndex("c2e section has trailing data")

    return IndexArtifact(
        format_version=header["format_version"],
        params=BuildParams.model_validate(header["params"]),
        chunks=chunks,
        tree=tree,
        store=store,
        graph=graph,
        index=BiIndex(entity_to_chunks=entity_to_chunks, chunk_to_entity_freq=chunk_to_entity_freq),
        stats=BuildStats.model_validate(header["stats"]),
    )


def _validate(artifact: IndexArtifact, path: Path) -> None:
    n = len(artifact.chunks)
    if [c.chunk_id for c in artifact.chunks] != list(range(n)):
        raise CorruptIndex(f"{path}: chunk ids are not dense")
    if artifact.tree.leaf_count != n:
        raise CorruptIndex(f"{path}: tree has {artifact.tree.leaf_count} leaves for {n} chunks")
    if len(artifact.store) != len(artifact.tree.nodes):
        raise CorruptIndex(f"{path}: {len(artifact.store)} vectors for {len(artifact.tree.nodes)} tree nodes")
    _validate_tree(artifact.tree, path)

    indexed = set(artifact.index.entity_to_chunks)
    vertices = set(artifact.graph.vertices())
    if indexed != vertices:
        odd = sorted(indexed ^ vertices)[:3]
        raise CorruptIndex(f"{path}: graph vertices and indexed entities differ: {odd}")
    if any(not 0 <= c < n for c in artifact.index.chunk_to_entity_freq):
        raise CorruptIndex(f"{path}: chunk index references unknown chunks")

    listed = {e for freqs in artifact.index.chunk_to_entity_freq.values() for e in freqs}
    names = sorted(indexed | listed)
    step = max(1, len(names) // SYMMETRY_SAMPLE)
    sample = names[::step]
    problem = next(asymmetries(artifact.index, sample), None)
    if problem:
        raise CorruptIndex(f"{path}: entity/chunk indexes disagree: {problem}")


def _validate_tree(tree: SummaryTree, path: Path) -> None:
    leaves = tree.leaf_count
    g = tree.group_size
    for node in tree.nodes:
        if node.embedding_ref != node.node_id:
            raise CorruptIndex(f"{path}: node {node.node_id} points at vector {node.embedding_ref}")
        if node.level == 0:
            if node.children or node.node_id >= leaves:
                raise CorruptIndex(f"{path}: leaf node {node.node_id} is malformed")
            continue
        if not 2 <= len(node.children) <= max(g, 2):
            raise CorruptIndex(f"{path}: summary node {node.node_id} has {len(node.children)} children")
        if any(not 0 <= child < node.node_id for child in node.children):
            raise CorruptIndex(f"{path}: node {node.node_id} has invalid children")
    if tree.summary_count != tree.summarizer_calls:
        raise CorruptIndex(f"{path}: {tree.summary_count} summary nodes for {tree.summarizer_calls} summarizer calls")
    if any(not 0 <= node_id < len(tree.nodes) for level in tree.levels for node_id in level):
        raise CorruptIndex(f"{path}: tree levels reference unknown nodes")
