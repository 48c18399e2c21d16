# tests/test_synthetic.py
import random

from e2rag.chunker import tokenize
from e2rag.graph import split_sentences
from e2rag.services import RuleBasedExtractor
from e2rag.stats import linear_fit, parse_sizes
from e2rag.synthetic import filler_sentence, generate_document, planted_corpus

EXTRACTOR = RuleBasedExtractor()


def test_generate_document_is_seeded_and_sized():
    text = generate_document(2000, n_entities=20, seed=5)
    assert text == generate_document(2000, n_entities=20, seed=5)
    assert text != generate_document(2000, n_entities=20, seed=6)
    assert 2000 <= len(tokenize(text)) < 2010


def test_filler_has_no_entities():
    rng = random.Random(0)
    for _ in range(50):
        assert EXTRACTOR.extract(filler_sentence(rng)) == []


def test_planted_entities_meet_exactly_once():
    corpus = planted_corpus(n_facts=6, filler_between=5, seed=11)
    sentences = split_sentences(corpus.text)
    for fact in corpus.facts:
        meetings = [
            s for s in sentences
            if set(fact.entities) <= {o.canonical for o in EXTRACTOR.extract(s)}
        ]
        assert meetings == [fact.sentence + " "] or meetings == [fact.sentence]
    for item, fact in zip(corpus.items, corpus.facts):
        assert item.choices[item.gold_index] == fact.answer
        assert len(set(item.choices)) == len(item.choices)


def test_linear_fit():
    fit = linear_fit([1, 2, 3, 4], [3, 5, 7, 9])
    assert round(fit.slope, 9) == 2.0
    assert round(fit.intercept, 9) == 1.0
    assert round(fit.r2, 9) == 1.0


def test_parse_sizes():
    assert parse_sizes("10k, 2500,1m") == [10_000, 2_500, 1_000_000]
