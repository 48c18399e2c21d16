# =============================================================================
# E2RAG BACKENDS PACKAGE
# Summarizer, embedder and entity-extractor implementations
# =============================================================================
"""
Backend construction from settings.

Available backends:
- OfflineSummarizer / HttpSummarizer
- HashingEmbedder / HttpEmbedder
- RuleBasedExtractor / SubprocessExtractor
"""

import logging
from dataclasses import dataclass, field
from typing import Union

from e2rag.config import Settings
from e2rag.services.base import CallCounter, Embedder, EntityExtractor, Summarizer
from e2rag.services.embedder import HashingEmbedder, HttpEmbedder, repair_zero_rows
from e2rag.services.extractor import (
    RuleBasedExtractor,
    SubprocessExtractor,
    canonicalize,
    load_noun_lexicon,
)
from e2rag.services.summarizer import HttpSummarizer, OfflineSummarizer

logger = logging.getLogger(__name__)


@dataclass
class Backends:
    summarizer: Summarizer
    embedder: Embedder
    extractor: EntityExtractor
    counter: CallCounter = field(default_factory=CallCounter)

    def identifiers(self) -> dict:
        """Backend names safe to persist (never credentials)."""
        return {
            "summarizer": getattr(self.summarizer, "identifier", self.summarizer.name),
            "embedder": getattr(self.embedder, "identifier", self.embedder.name),
            "extractor": getattr(self.extractor, "identifier", self.extractor.name),
        }

    def close(self) -> None:
        """Release HTTP clients and external processes."""
        for backend in (self.summarizer, self.embedder, self.extractor):
            close = getattr(backend, "close", None)
            if close is not None:
                close()


def build_extractor(settings: Settings) -> Union[RuleBasedExtractor, SubprocessExtractor]:
    if settings.EXTRACTOR_COMMAND:
        return SubprocessExtractor(settings.EXTRACTOR_COMMAND)
    lexicon = load_noun_lexicon(settings.NOUN_LEXICON) if settings.NOUN_LEXICON else None
    return RuleBasedExtractor(noun_lexicon=lexicon)


def build_backends(settings: Settings) -> Backends:
    """Instantiate one backend per role, all sharing a single call counter."""
    counter = CallCounter()

    summarizer_config = settings.summarizer_backend()
    if summarizer_config.kind == "http":
        summarizer = HttpSummarizer(
            summarizer_config,
            counter=counter,
            prompt=settings.SUMMARY_PROMPT,
            max_tokens=settings.SUMMARY_MAX_TOKENS,
        )
    else:
        summarizer = OfflineSummarizer(counter=counter, max_tokens=settings.OFFLINE_SUMMARY_TOKENS)

    embedder_config = settings.embedder_backend()
    if embedder_config.kind == "http":
        embedder = HttpEmbedder(embedder_config, counter=counter)
    else:
        embedder = HashingEmbedder(counter=counter, dimension=settings.EMBED_DIM)

    extractor = build_extractor(settings)
    logger.debug(f"Backends: summarizer={summarizer.name}, embedder={embedder.name}, extractor={extractor.name}")
    return Backends(summarizer=summarizer, embedder=embedder, extractor=extractor, counter=counter)


def offline_backends(noun_lexicon=None, dimension: int = 256, summary_tokens: int = 200) -> Backends:
    """Deterministic backends for tests, benchmarks and the synthetic experiments."""
    counter = CallCounter()
    return Backends(
        summarizer=OfflineSummarizer(counter=counter, max_tokens=summary_tokens),
        embedder=HashingEmbedder(counter=counter, dimension=dimension),
        extractor=RuleBasedExtractor(noun_lexicon=noun_lexicon),
        counter=counter,
    )


__all__ = [
    "Backends",
    "CallCounter",
    "Embedder",
    "EntityExtractor",
    "HashingEmbedder",
    "HttpEmbedder",
    "HttpSummarizer",
    "OfflineSummarizer",
    "RuleBasedExtractor",
    "SubprocessExtractor",
    "Summarizer",
    "build_backends",
    "build_extractor",
    "canonicalize",
    "load_noun_lexicon",
    "offline_backends",
    "repair_zero_rows",
]
