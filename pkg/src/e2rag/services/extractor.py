# src/e2rag/services/extractor.py
"""
Entity extractors.

RuleBasedExtractor (default):
- maximal runs of capitalized word tokens are entities, after stripping
  sentence-initial stopwords ("Has Slytherin ..." -> "slytherin")
- remaining tokens are matched longest-first against a noun lexicon
- canonical form = lowercase with collapsed whitespace

SubprocessExtractor speaks a line protocol with an external program:
one sentence per input line, tab-separated entities per output line.
"""

import hashlib
import logging
import shlex
import subprocess
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from e2rag.chunker import DEFAULT_TOKENIZER, Tokenizer
from e2rag.errors import BackendError
from e2rag.models import EntityOccurrence

logger = logging.getLogger(__name__)

# Capitalized only because they open a sentence.
SENTENCE_INITIAL_STOPWORDS: FrozenSet[str] = frozenset({
    "a", "an", "the", "this", "that", "these", "those", "it", "its", "he", "she",
    "they", "we", "you", "his", "her", "their", "our", "my", "your", "there",
    "here", "then", "when", "where", "what", "who", "whom", "whose", "which",
    "why", "how", "is", "are", "was", "were", "be", "been", "has", "have", "had",
    "do", "does", "did", "can", "could", "will", "would", "shall", "should",
    "may", "might", "must", "and", "but", "or", "so", "yet", "if", "in", "on",
    "at", "by", "for", "from", "of", "to", "with", "as", "after", "before",
    "while", "although", "because", "since", "once", "all", "some", "no", "not",
    "yes", "one", "every", "each", "both", "many", "much", "most", "other",
    "such", "only", "also", "still", "now", "later", "meanwhile", "finally",
    "however", "please", "tell", "describe", "explain", "list", "name",
})

PRONOUNS: FrozenSet[str] = frozenset({"i"})


def canonicalize(surface: str) -> str:
    return " ".join(surface.lower().split())


def load_noun_lexicon(path: Path) -> Set[str]:
    """One lowercase term per line, UTF-8; blank lines and '#' comments ignored."""
    terms: Set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            term = canonicalize(line)
            if term and not term.startswith("#"):
                terms.add(term)
    logger.info(f"📚 Loaded {len(terms)} noun lexicon terms from {path}")
    return terms


def _count(found: Iterable[Tuple[str, str]]) -> List[EntityOccurrence]:
    """Aggregate (canonical, surface) hits into occurrences ordered by first appearance."""
    counts: "OrderedDict[str, int]" = OrderedDict()
    surfaces: Dict[str, Set[str]] = {}
    for canonical, surface in found:
        if not canonical:
            continue
        counts[canonical] = counts.get(canonical, 0) + 1
        surfaces.setdefault(canonical, set()).add(surface)
    return [
        EntityOccurrence(canonical=c, count=n, surface_forms=sorted(surfaces[c]))
        for c, n in counts.items()
    ]


class RuleBasedExtractor:
    name = "rule-based"

    def __init__(
        self,
        noun_lexicon: Optional[Iterable[str]] = None,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    ):
        self.tokenizer = tokenizer
        self._lexicon: Set[Tuple[str, ...]] = set()
        for term in noun_lexicon or ():
            tokens, _ = tokenizer.split(canonicalize(term))
            if tokens:
                self._lexicon.add(tuple(t.lower() for t in tokens))
        self._max_term_len = max((len(t) for t in self._lexicon), default=0)

    @property
    def identifier(self) -> str:
        if not self._lexicon:
            return self.name
        terms = "\n".join(sorted(" ".join(t) for t in self._lexicon))
        digest = hashlib.sha256(terms.encode("utf-8")).hexdigest()[:12]
        return f"{self.name}+lexicon:{digest}"

    @staticmethod
    def _is_capitalized(token: str) -> bool:
        return token[:1].isupper() and token[:1].isalpha()

    def _capitalized_runs(self, tokens: List[str]) -> List[Tuple[int, int]]:
        runs = []
        i = 0
        first_word = next((j for j, t in enumerate(tokens) if t[:1].isalnum()), None)
        while i < len(tokens):
            if not self._is_capitalized(tokens[i]):
                i += 1
                continue
            start = i
            while i < len(tokens) and self._is_capitalized(tokens[i]):
                i += 1
            end = i
            if start == first_word:
                while start < end and tokens[start].lower() in SENTENCE_INITIAL_STOPWORDS:
                    start += 1
            if end - start == 1 and tokens[start].lower() in PRONOUNS:
                continue
            if start < end:
                runs.append((start, end))
        return runs

    def extract(self, sentence: str) -> List[EntityOccurrence]:
        tokens, spaces = self.tokenizer.split(sentence)
        if not tokens:
            return []

        hits: List[Tuple[int, str, str]] = []
        consumed = [False] * len(tokens)
        for start, end in self._capitalized_runs(tokens):
            surface = self.tokenizer.join(tokens[start:end], spaces[start:end])
            hits.append((start, canonicalize(surface), surface))
            for j in range(start, end):
                consumed[j] = True

        if self._lexicon:
            lowered = [t.lower() for t in tokens]
            i = 0
            while i < len(tokens):
                matched = 0
                for length in range(min(self._max_term_len, len(tokens) - i), 0, -1):
                    if any(consumed[i:i + length]):
                        continue
                    if tuple(lowered[i:i + length]) in self._lexicon:
                        matched = length
                        break
                if matched:
                    surface = self.tokenizer.join(tokens[i:i + matched], spaces[i:i + matched])
                    hits.append((i, canonicalize(surface), surface))
                    i += matched
                else:
                    i += 1

        hits.sort(key=lambda hit: hit[0])
        return _count((canonical, surface) for _, canonical, surface in hits)


class SubprocessExtractor:
    """
    Runs an external extractor once and feeds it sentences line by line.

    Protocol: write the sentence (newlines replaced by spaces) plus "\\n";
    read one line of tab-separated entity strings (empty line = none).
    """

    name = "subprocess"

    def __init__(self, command: str):
        self.command = command
        self._lock = threading.Lock()
        self._proc: Optional[subprocess.Popen] = None

    @property
    def identifier(self) -> str:
        digest = hashlib.sha256(self.command.encode("utf-8")).hexdigest()[:12]
        return f"{self.name}:{digest}"

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            logger.info(f"🚀 Starting external extractor: {self.command}")
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        return self._proc

    def extract(self, sentence: str) -> List[EntityOccurrence]:
        line = " ".join(sentence.split())
        with self._lock:
            proc = self._ensure_started()
            try:
                proc.stdin.write(line + "\n")
                proc.stdin.flush()
                reply = proc.stdout.readline()
            except (BrokenPipeError, OSError) as e:
                raise BackendError(f"external extractor failed: {e}") from e
        if not reply:
            raise BackendError("external extractor closed its output")
        fields = [f for f in reply.rstrip("\n").split("\t") if f.strip()]
        return _count((canonicalize(f), f.strip()) for f in fields)

    def close(self) -> None:
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
            self._proc = None
