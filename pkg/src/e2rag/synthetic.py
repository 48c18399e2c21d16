# src/e2rag/synthetic.py
"""
Seeded synthetic corpora.

- `generate_document`: filler prose with random entity mentions, sized in
  tokens; used for scaling runs and large-index checks
- `planted_corpus`: documents where each pair of entities meets in exactly
  one sentence, plus QA items whose evidence is that sentence

Entity names are capitalized pseudo-words; filler text is lowercase apart
from sentence-initial stopwords, so the rule-based extractor finds exactly
the planted names.
"""

import random
from typing import List, Optional, Set, Tuple

from pydantic import BaseModel

from e2rag.models import QAItem

SYLLABLES = (
    "ka", "lo", "mir", "then", "dor", "vi", "sa", "rul", "an", "bel", "cor", "dra",
    "el", "fen", "gar", "hal", "ith", "jor", "kel", "lun", "mor", "nym", "os", "pra",
)
FILLER_NOUNS = ("river", "market", "tower", "garden", "road", "bridge", "harbor", "forest", "valley", "hall")
FILLER_VERBS = ("stood", "waited", "changed", "rested", "glowed", "faded", "grew", "shifted")
FILLER_ADVERBS = ("quietly", "slowly", "again", "today", "softly", "there", "often", "briefly")


class PlantedFact(BaseModel):
    entities: Tuple[str, str]
    sentence: str
    answer: str


class PlantedCorpus(BaseModel):
    text: str
    facts: List[PlantedFact]
    items: List[QAItem]


def make_names(rng: random.Random, count: int, capitalize: bool = True, taken: Optional[Set[str]] = None) -> List[str]:
    """`count` distinct pseudo-words of 2-4 syllables, none already in `taken`."""
    taken = taken if taken is not None else set()
    names: List[str] = []
    while len(names) < count:
        word = "".join(rng.choice(SYLLABLES) for _ in range(rng.randint(2, 4)))
        if word in taken:
            continue
        taken.add(word)
        names.append(word.capitalize() if capitalize else word)
    return names


def filler_sentence(rng: random.Random) -> str:
    return f"The {rng.choice(FILLER_NOUNS)} {rng.choice(FILLER_VERBS)} {rng.choice(FILLER_ADVERBS)}."


def mention_sentence(rng: random.Random, a: str, b: Optional[str] = None) -> str:
    noun = rng.choice(FILLER_NOUNS)
    if b is None:
        return f"The {noun} near {a} {rng.choice(FILLER_VERBS)}."
    return f"The {noun} saw {a} and {b} {rng.choice(FILLER_ADVERBS)}."


def generate_document(n_tokens: int, n_entities: int = 50, mention_rate: float = 0.2, seed: int = 0) -> str:
    """
    About `n_tokens` tokens of filler with entity mentions. A mention sentence
    names one or two entities drawn uniformly from a pool of `n_entities`.
    """
    rng = random.Random(seed)
    entities = make_names(rng, n_entities) if n_entities else []
    sentences: List[str] = []
    tokens = 0
    while tokens < n_tokens:
        if entities and rng.random() < mention_rate:
            if len(entities) > 1 and rng.random() < 0.5:
                a, b = rng.sample(entities, 2)
                sentence = mention_sentence(rng, a, b)
                tokens += 8
            else:
                sentence = mention_sentence(rng, rng.choice(entities))
                tokens += 6
        else:
            sentence = filler_sentence(rng)
            tokens += 5
        sentences.append(sentence)
    return " ".join(sentences)


def planted_corpus(n_facts: int = 5, filler_between: int = 40, n_choices: int = 4, seed: int = 0) -> PlantedCorpus:
    """
    Each fact "A gave B the x y." is the only place where A and B appear.
    Every fact yields one multiple-choice item; distractors are pseudo-words
    that never occur in the document.
    """
    rng = random.Random(seed)
    taken: Set[str] = set()
    names = make_names(rng, 2 * n_facts, taken=taken)
    object_words = make_names(rng, 2 * n_facts * n_choices, capitalize=False, taken=taken)
    objects = [f"the {object_words[i]} {object_words[i + 1]}" for i in range(0, len(object_words), 2)]

    facts: List[PlantedFact] = []
    items: List[QAItem] = []
    sentences: List[str] = []
    for i in range(n_facts):
        a, b = names[2 * i], names[2 * i + 1]
        answer = objects[i * n_choices]
        distractors = objects[i * n_choices + 1:(i + 1) * n_choices]
        sentence = f"{a} gave {b} {answer}."
        facts.append(PlantedFact(entities=(a.lower(), b.lower()), sentence=sentence, answer=answer))

        choices = list(distractors)
        gold = rng.randrange(n_choices)
        choices.insert(gold, answer)
        items.append(QAItem(question=f"What did {a} give to {b}?", answer=answer, choices=choices, gold=gold))

        sentences.extend(filler_sentence(rng) for _ in range(filler_between))
        sentences.append(sentence)
    sentences.extend(filler_sentence(rng) for _ in range(filler_between))
    return PlantedCorpus(text=" ".join(sentences), facts=facts, items=items)
