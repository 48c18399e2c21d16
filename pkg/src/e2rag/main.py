#!/usr/bin/env python
# =============================================================================
# E2RAG MAIN ENTRY POINT
# Command-line interface: index, query, eval, stats
# =============================================================================
"""
E2RAG Main Module

Usage:
    e2rag index book.txt --out book.e2idx -g 8
    e2rag query book.e2idx "Has Slytherin won the House Cup?" -k 8 --hop 4
    e2rag query book.e2idx --batch questions.txt
    e2rag eval book.e2idx qa.jsonl
    e2rag stats book.e2idx
    e2rag stats --scaling --sizes 10k,100k,1m

JSON goes to stdout, diagnostics to stderr.
Exit codes: 0 success, 1 algorithmic failure, 2 usage or I/O error.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import ValidationError

from e2rag.config import Settings, load_settings
from e2rag.errors import EXIT_OK, EXIT_USAGE, E2RagError
from e2rag.evaluation import run_eval
from e2rag.models import RetrievalResult
from e2rag.pipeline import build_index, params_from_settings
from e2rag.retrieval import QueryEngine, RetrievalOptions
from e2rag.services import Backends, build_backends
from e2rag.stats import call_bound, index_stats, parse_sizes, scaling_run
from e2rag.storage import FILE_SUFFIX, IndexArtifact, load, save

logger = logging.getLogger("e2rag")

RESULT_SCHEMA_VERSION = 1


class UsageError(E2RagError):
    exit_code = EXIT_USAGE


# =============================================================================
# HELPERS
# =============================================================================

def _emit(payload) -> None:
    sys.stdout.write(json.dumps(payload, ensure_ascii=False) + "\n")
    sys.stdout.flush()


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}") from e


def _settings_with_overrides(args: argparse.Namespace) -> Settings:
    settings = load_settings(args.config)
    overrides = {
        "CHUNK_SIZE": getattr(args, "chunk_size", None),
        "OVERLAP": getattr(args, "overlap", None),
        "GROUP_SIZE": getattr(args, "group_size", None),
        "GROUPING": getattr(args, "grouping", None),
        "BUILD_TO_ROOT": getattr(args, "build_to_root", None) or None,
        "NOUN_LEXICON": getattr(args, "noun_lexicon", None),
        "TOP_K": getattr(args, "k", None),
        "HOP": getattr(args, "hop", None),
        "LOOP_THRESHOLD": getattr(args, "threshold", None),
        "LOG_LEVEL": getattr(args, "log_level", None),
    }
    return settings.model_copy(update={key: value for key, value in overrides.items() if value is not None})


def _retrieval_options(args: argparse.Namespace) -> RetrievalOptions:
    return RetrievalOptions(
        mode=args.mode,
        use_graph_filter=not args.no_graph_filter,
        use_entity_aware_rank=not args.no_entity_aware_rank,
        use_occurrence_rank=not args.no_occurrence_rank,
        use_dense_retrieval=not args.no_dense_retrieval,
    )


def _open_engine(path: Path, settings: Settings) -> Tuple[QueryEngine, Backends]:
    """Load an index with query backends matching the ones it was built with."""
    artifact = load(path)
    if settings.EMBEDDER_KIND == "offline":
        settings = settings.model_copy(update={"EMBED_DIM": artifact.store.dimension})
    backends = build_backends(settings)
    current = backends.identifiers()
    for role in ("embedder", "extractor"):
        built_with = getattr(artifact.params, role)
        if current[role] != built_with:
            backends.close()
            raise UsageError(f"{path} was built with {role} {built_with!r}, but the current settings give {current[role]!r}")
    return QueryEngine(artifact, backends.extractor, backends.embedder), backends


def result_payload(result: RetrievalResult, engine: QueryEngine) -> dict:
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "mode": result.mode.value,
        "query_entities": result.query_entities,
        "chunks": [{"id": node_id, "text": engine.node_text(node_id)} for node_id in result.chunks],
        "pairs": [{"entities": list(p.entities), "chunks": p.chunks} for p in result.pairs],
        "trace": [step.model_dump(mode="json") for step in result.trace],
        "formatted": result.formatted,
        "retrieval_ms": result.retrieval_ms,
    }


def index_summary(artifact: IndexArtifact, out: Path) -> dict:
    n, g = len(artifact.chunks), artifact.tree.group_size
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "index": str(out),
        "chunks": n,
        "summaries": artifact.tree.summary_count,
        "levels": len(artifact.tree.levels),
        "entities": len(artifact.graph),
        "edges": artifact.graph.nx.number_of_edges(),
        "summarizer_calls": artifact.stats.summarizer_calls,
        "predicted_summarizer_calls": artifact.stats.predicted_summarizer_calls,
        "call_bound": call_bound(n, g),
        "embedder_calls": artifact.stats.embedder_calls,
        "timings": artifact.stats.timings.model_dump(mode="json"),
    }


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_index(args: argparse.Namespace, settings: Settings) -> int:
    source = Path(args.input)
    text = _read_text(source)
    out = Path(args.out) if args.out else source.with_suffix(FILE_SUFFIX)
    params = params_from_settings(settings, provenance=source.name)
    backends = build_backends(settings)
    try:
        artifact = build_index(
            text,
            params,
            backends,
            workers=settings.INDEX_WORKERS,
            embed_batch_size=settings.EMBED_BATCH_SIZE,
        )
    finally:
        backends.close()
    save(artifact, out, record_timings=settings.RECORD_TIMINGS)
    _emit(index_summary(artifact, out))
    return EXIT_OK


def cmd_query(args: argparse.Namespace, settings: Settings) -> int:
    if not args.question and not args.batch:
        raise UsageError("give a question or --batch <file>")
    options = _retrieval_options(args)
    if args.batch:
        questions = [line.strip() for line in _read_text(Path(args.batch)).splitlines() if line.strip()]
    else:
        questions = [args.question]

    engine, backends = _open_engine(Path(args.index), settings)
    try:
        def answer(question: str) -> RetrievalResult:
            return engine.retrieve(
                question,
                k=settings.TOP_K,
                h=settings.HOP,
                loop_threshold=settings.LOOP_THRESHOLD,
                options=options,
            )

        with ThreadPoolExecutor(max_workers=max(1, settings.INDEX_WORKERS)) as pool:
            results = list(pool.map(answer, questions))
    finally:
        backends.close()

    for result in results:
        if args.format == "text":
            sys.stdout.write(f"[{result.mode.value}]\n{result.formatted}\n")
        else:
            _emit(result_payload(result, engine))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    options = _retrieval_options(args)
    lines = _read_text(Path(args.qa_file)).splitlines()
    engine, backends = _open_engine(Path(args.index), settings)
    try:
        report = run_eval(
            engine,
            lines,
            k=settings.TOP_K,
            h=settings.HOP,
            loop_threshold=settings.LOOP_THRESHOLD,
            options=options,
        )
    finally:
        backends.close()
    payload = report.model_dump(mode="json")
    if not args.per_item:
        payload.pop("outcomes")
    _emit(payload)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, settings: Settings) -> int:
    if args.scaling:
        try:
            sizes = parse_sizes(args.sizes)
        except ValueError as e:
            raise UsageError(f"invalid --sizes: {e}") from e
        report = scaling_run(sizes, params_from_settings(settings), seed=args.seed)
        _emit(report.model_dump(mode="json"))
        return EXIT_OK
    if not args.index:
        raise UsageError("give an index file or --scaling")
    _emit(index_stats(load(Path(args.index))).model_dump(mode="json"))
    return EXIT_OK


# =============================================================================
# ARGUMENT PARSING
# =============================================================================

def _add_retrieval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-k", type=int, default=None, help="maximum chunks returned (default 8)")
    parser.add_argument("--hop", type=int, default=None, help="initial hop threshold h (default 4)")
    parser.add_argument("--threshold", type=int, default=None, help="candidate cap of the adaptive loop (default 25)")
    parser.add_argument("--mode", choices=["auto", "dense"], default="auto", help="'dense' forces dense-only retrieval")
    parser.add_argument("--no-graph-filter", action="store_true", help="keep every query-entity pair")
    parser.add_argument("--no-entity-aware-rank", action="store_true", help="cut local candidates by document order")
    parser.add_argument("--no-occurrence-rank", action="store_true", help="plain dense ranking for global queries")
    parser.add_argument("--no-dense-retrieval", action="store_true", help="skip dense search on the global paths")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="e2rag", description="Entity-graph and summary-tree retrieval over long documents")
    parser.add_argument("--config", type=Path, default=None, help="KEY=value settings file")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build an index file from a UTF-8 text document")
    p_index.add_argument("input")
    p_index.add_argument("--out", default=None, help=f"output path (default <input>{FILE_SUFFIX})")
    p_index.add_argument("--chunk-size", type=int, default=None)
    p_index.add_argument("--overlap", type=int, default=None)
    p_index.add_argument("-g", "--group-size", type=int, default=None)
    p_index.add_argument("--grouping", choices=["carry", "ceil"], default=None)
    p_index.add_argument("--build-to-root", action="store_true")
    p_index.add_argument("--noun-lexicon", type=Path, default=None)

    p_query = sub.add_parser("query", help="retrieve context for a question")
    p_query.add_argument("index")
    p_query.add_argument("question", nargs="?", default=None)
    p_query.add_argument("--batch", default=None, help="file with one question per line")
    p_query.add_argument("--format", choices=["json", "text"], default="json")
    p_query.add_argument("--noun-lexicon", type=Path, default=None)
    _add_retrieval_flags(p_query)

    p_eval = sub.add_parser("eval", help="retrieval-proxy scores over a JSON-lines QA file")
    p_eval.add_argument("index")
    p_eval.add_argument("qa_file")
    p_eval.add_argument("--per-item", action="store_true", help="include per-question outcomes")
    p_eval.add_argument("--noun-lexicon", type=Path, default=None)
    _add_retrieval_flags(p_eval)

    p_stats = sub.add_parser("stats", help="index statistics or the indexing scaling experiment")
    p_stats.add_argument("index", nargs="?", default=None)
    p_stats.add_argument("--scaling", action="store_true")
    p_stats.add_argument("--sizes", default="10k,50k,100k,250k,500k,1m")
    p_stats.add_argument("--seed", type=int, default=0)
    p_stats.add_argument("--chunk-size", type=int, default=None)
    p_stats.add_argument("--overlap", type=int, default=None)
    p_stats.add_argument("-g", "--group-size", type=int, default=None)
    return parser


COMMANDS = {
    "index": cmd_index,
    "query": cmd_query,
    "eval": cmd_eval,
    "stats": cmd_stats,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = _settings_with_overrides(args)
    except ValidationError as e:
        sys.stderr.write(f"❌ Invalid configuration: {e}\n")
        return EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    try:
        return COMMANDS[args.command](args, settings)
    except E2RagError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"❌ Invalid arguments: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
