# tests/test_evaluation.py
import json
import random

import pytest

from e2rag.evaluation import choose, lcs_length, load_qa_items, rouge_l, run_eval
from e2rag.models import BuildParams
from e2rag.pipeline import build_index
from e2rag.retrieval import QueryEngine
from e2rag.services import offline_backends
from e2rag.synthetic import planted_corpus


def dp_lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[-1][-1]


def test_rouge_l_examples():
    assert rouge_l("the cat sat", "the cat sat").f1 == 1.0
    assert rouge_l("red green", "blue yellow").f1 == 0.0
    score = rouge_l("a b c d", "a c d")
    assert score.precision == pytest.approx(0.75)
    assert score.recall == pytest.approx(1.0)
    assert score.f1 == pytest.approx(6 / 7)


def test_rouge_l_is_case_insensitive_and_handles_empty():
    assert rouge_l("The Cat", "the cat").f1 == 1.0
    assert rouge_l("", "anything").f1 == 0.0


@pytest.mark.parametrize("seed", range(50))
def test_lcs_matches_dynamic_programming_table(seed):
    rng = random.Random(seed)
    vocab = list("abcdef")
    a = [rng.choice(vocab) for _ in range(rng.randint(0, 30))]
    b = [rng.choice(vocab) for _ in range(rng.randint(0, 30))]
    assert lcs_length(a, b) == dp_lcs(a, b)


def test_contained_answer_has_full_recall():
    context = "house cup-slytherin:\nSlytherin won the House Cup again today.\n"
    assert rouge_l(context, "won the House Cup").recall == 1.0


def test_choose_prefers_best_covered_choice():
    context = "the silver lantern was lost"
    assert choose(["a golden key", "the silver lantern", "a book"], context) == 1


def test_malformed_lines_are_counted():
    lines = [
        json.dumps({"question": "Who?", "answer": "Ron"}),
        "{not json",
        json.dumps({"question": "Which?", "choices": ["a", "b"], "gold": 5}),
        "",
        json.dumps({"question": "Which?", "choices": ["a", "b"], "gold": "b"}),
    ]
    items, malformed = load_qa_items(lines)
    assert len(items) == 2
    assert malformed == 2
    assert items[1].gold_index == 1


def test_empty_qa_file(house_cup_engine):
    report = run_eval(house_cup_engine, [])
    assert report.items == 0
    assert report.accuracy is None
    assert report.scoring == "retrieval-proxy"


def test_close_ended_recall(house_cup_engine):
    lines = [json.dumps({"question": "Has Slytherin won the House Cup?", "answer": "won the House Cup"})]
    report = run_eval(house_cup_engine, lines)
    assert report.close_ended == 1
    assert report.mean_recall == 1.0
    assert report.modes == {"Local": 1}
    assert report.latency_ms.p50 is not None


def test_planted_questions_are_all_answered():
    corpus = planted_corpus(n_facts=5, seed=3)
    backends = offline_backends(dimension=64)
    artifact = build_index(corpus.text, BuildParams(chunk_size=100, overlap=10, group_size=4), backends)
    engine = QueryEngine(artifact, backends.extractor, backends.embedder)
    lines = [item.model_dump_json() for item in corpus.items]

    report = run_eval(engine, lines)

    assert report.multiple_choice == 5
    assert report.correct == 5
    assert report.accuracy == 1.0
    assert report.modes == {"Local": 5}
