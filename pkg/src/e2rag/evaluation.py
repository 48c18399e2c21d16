# src/e2rag/evaluation.py
"""
Retrieval-proxy evaluation.

No answer is generated: multiple-choice items pick the choice best covered
by the retrieved context (ROUGE-L recall of the choice), close-ended items
report the ROUGE-L recall of the gold answer against the context.
"""

import json
import logging
from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from e2rag.chunker import DEFAULT_TOKENIZER, Tokenizer
from e2rag.models import QAItem
from e2rag.retrieval import QueryEngine, RetrievalOptions

logger = logging.getLogger(__name__)

METRICS_SCHEMA_VERSION = 1
SCORING = "retrieval-proxy"


class RougeScore(BaseModel):
    precision: float
    recall: float
    f1: float


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    row = [0] * (len(b) + 1)
    for x in a:
        diagonal = 0
        for j, y in enumerate(b, start=1):
            above = row[j]
            row[j] = diagonal + 1 if x == y else max(row[j], row[j - 1])
            diagonal = above
    return row[-1]


def rouge_l(candidate: str, reference: str, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> RougeScore:
    """LCS-based precision/recall/F1 over lowercased tokens."""
    cand = [t.lower() for t in tokenizer.split(candidate)[0]]
    ref = [t.lower() for t in tokenizer.split(reference)[0]]
    lcs = lcs_length(cand, ref)
    precision = lcs / len(cand) if cand else 0.0
    recall = lcs / len(ref) if ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RougeScore(precision=precision, recall=recall, f1=f1)


# =============================================================================
# QA FILES
# =============================================================================

def load_qa_items(lines: Iterable[str]) -> Tuple[List[QAItem], int]:
    """Parse JSON lines; malformed lines are logged and counted, blank lines ignored."""
    items: List[QAItem] = []
    malformed = 0
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            items.append(QAItem.model_validate(json.loads(line)))
        except (json.JSONDecodeError, ValidationError) as e:
            malformed += 1
            logger.warning(f"⚠️ Skipping malformed QA line {number}: {str(e).splitlines()[0]}")
    return items, malformed


# =============================================================================
# REPORT
# =============================================================================

class ItemOutcome(BaseModel):
    question: str
    mode: str
    retrieval_ms: float
    chosen: Optional[int] = None
    correct: Optional[bool] = None
    recall: Optional[float] = None
    f1: Optional[float] = None


class LatencySummary(BaseModel):
    p50: Optional[float] = None
    p90: Optional[float] = None
    p99: Optional[float] = None
    mean: Optional[float] = None


class EvalReport(BaseModel):
    schema_version: int = METRICS_SCHEMA_VERSION
    scoring: str = Field(SCORING, description="Scores measure retrieved context, not generated answers")
    items: int = 0
    malformed: int = 0
    multiple_choice: int = 0
    correct: int = 0
    accuracy: Optional[float] = None
    close_ended: int = 0
    mean_recall: Optional[float] = None
    mean_f1: Optional[float] = None
    latency_ms: LatencySummary = Field(default_factory=LatencySummary)
    modes: Dict[str, int] = Field(default_factory=dict)
    outcomes: List[ItemOutcome] = Field(default_factory=list)


def choose(choices: Sequence[str], context: str, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> int:
    """Index of the choice best covered by the context; ties go to the earliest choice."""
    recalls = [rouge_l(context, choice, tokenizer).recall for choice in choices]
    return int(np.argmax(recalls))


def run_eval(
    engine: QueryEngine,
    lines: Iterable[str],
    k: int = 8,
    h: int = 4,
    loop_threshold: int = 25,
    options: Optional[RetrievalOptions] = None,
) -> EvalReport:
    items, malformed = load_qa_items(lines)
    report = EvalReport(items=len(items), malformed=malformed)
    logger.info(f"🚀 Evaluating {len(items)} QA items ({malformed} malformed lines skipped)")

    latencies: List[float] = []
    recalls: List[float] = []
    f1s: List[float] = []
    modes: Counter = Counter()
    for item in items:
        result = engine.retrieve(item.question, k=k, h=h, loop_threshold=loop_threshold, options=options)
        latencies.append(result.retrieval_ms or 0.0)
        modes[result.mode.value] += 1
        outcome = ItemOutcome(question=item.question, mode=result.mode.value, retrieval_ms=result.retrieval_ms or 0.0)
        if item.choices:
            outcome.chosen = choose(item.choices, result.formatted, engine.tokenizer)
            outcome.correct = outcome.chosen == item.gold_index
            report.multiple_choice += 1
            report.correct += int(outcome.correct)
        else:
            score = rouge_l(result.formatted, item.answer, engine.tokenizer)
            outcome.recall, outcome.f1 = score.recall, score.f1
            recalls.append(score.recall)
            f1s.append(score.f1)
            report.close_ended += 1
        report.outcomes.append(outcome)

    if report.multiple_choice:
        report.accuracy = report.correct / report.multiple_choice
    if recalls:
        report.mean_recall = float(np.mean(recalls))
        report.mean_f1 = float(np.mean(f1s))
    if latencies:
        p50, p90, p99 = np.percentile(latencies, [50, 90, 99])
        report.latency_ms = LatencySummary(p50=float(p50), p90=float(p90), p99=float(p99), mean=float(np.mean(latencies)))
    report.modes = dict(sorted(modes.items()))

    logger.info(f"✅ Evaluation done: accuracy={report.accuracy}, mean_recall={report.mean_recall}")
    return report
