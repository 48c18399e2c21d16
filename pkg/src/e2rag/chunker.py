# src/e2rag/chunker.py
"""
Tokenization and fixed-size overlapping chunking.

Every structure built later (tree leaves, entity indexes, evidence merging)
refers to chunks by their ordinal `chunk_id`, so chunking is pure and
deterministic for a given tokenizer and parameters.
"""

import logging
import re
from typing import List, Protocol, Sequence, Tuple

from e2rag.errors import EmptyDocument, InvalidChunkConfig
from e2rag.models import Chunk, TokenStream

logger = logging.getLogger(__name__)


class Tokenizer(Protocol):
    """
    Pluggable token splitter.

    `split` returns the tokens together with a flag per token telling whether
    whitespace preceded it; `join` is the inverse up to whitespace
    normalization. Implementations must give back the same tokens when
    re-splitting their own `join` output.
    """

    name: str

    def split(self, text: str) -> Tuple[List[str], List[bool]]:
        ...

    def join(self, tokens: Sequence[str], spaces: Sequence[bool]) -> str:
        ...


class RegexTokenizer:
    """Default splitter: runs of word characters, or single punctuation marks."""

    name = "regex-word-punct"
    PATTERN = re.compile(r"\w+|[^\w\s]")

    def split(self, text: str) -> Tuple[List[str], List[bool]]:
        tokens: List[str] = []
        spaces: List[bool] = []
        for match in self.PATTERN.finditer(text):
            start = match.start()
            tokens.append(match.group())
            spaces.append(start > 0 and text[start - 1].isspace())
        return tokens, spaces

    def join(self, tokens: Sequence[str], spaces: Sequence[bool]) -> str:
        parts = []
        for i, (token, space) in enumerate(zip(tokens, spaces)):
            if i and space:
                parts.append(" ")
            parts.append(token)
        return "".join(parts)


DEFAULT_TOKENIZER = RegexTokenizer()


def tokenize(text: str, tokenizer: Tokenizer = DEFAULT_TOKENIZER, provenance: str = "<memory>") -> TokenStream:
    """
    Split a document into a TokenStream.

    Raises:
        EmptyDocument: when the text holds no tokens at all
    """
    tokens, spaces = tokenizer.split(text)
    if not tokens:
        raise EmptyDocument(f"document {provenance!r} contains no tokens")
    return TokenStream(tokens=tokens, spaces=spaces, provenance=provenance)


def chunk_spans(length: int, chunk_size: int, overlap: int) -> List[Tuple[int, int]]:
    """Half-open token spans of every chunk; the final one may be shorter."""
    if chunk_size <= 0:
        raise InvalidChunkConfig("chunk_size must be positive")
    if overlap < 0 or overlap >= chunk_size:
        raise InvalidChunkConfig(
            f"overlap must satisfy 0 <= overlap < chunk_size (got overlap={overlap}, chunk_size={chunk_size})"
        )
    stride = chunk_size - overlap
    spans: List[Tuple[int, int]] = []
    start = 0
    while True:
        end = min(start + chunk_size, length)
        spans.append((start, end))
        if end >= length:
            break
        start += stride
    return spans


def split_into_chunks(
    ts: TokenStream,
    chunk_size: int = 1200,
    overlap: int = 100,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
) -> List[Chunk]:
    """
    Cut a token stream into windows of `chunk_size` tokens advancing by
    `chunk_size - overlap`. A short final window is kept as-is.

    Raises:
        InvalidChunkConfig: when overlap >= chunk_size
        EmptyDocument: when the stream is empty
    """
    if len(ts) == 0:
        raise EmptyDocument("cannot chunk an empty token stream")
    spans = chunk_spans(len(ts), chunk_size, overlap)
    chunks = [
        Chunk(
            chunk_id=i,
            token_span=(start, end),
            text=tokenizer.join(ts.tokens[start:end], ts.spaces[start:end]),
            token_count=end - start,
        )
        for i, (start, end) in enumerate(spans)
    ]
    logger.debug(f"Split {len(ts)} tokens into {len(chunks)} chunks (size={chunk_size}, overlap={overlap})")
    return chunks
