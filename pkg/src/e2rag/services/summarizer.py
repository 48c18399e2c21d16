# src/e2rag/services/summarizer.py
"""Summarizer backends: a deterministic offline stub and a chat-completions client."""

import logging
from typing import Optional, Sequence

import httpx

from e2rag.chunker import DEFAULT_TOKENIZER, Tokenizer
from e2rag.config import DEFAULT_SUMMARY_PROMPT, BackendConfig
from e2rag.errors import BackendError
from e2rag.services.base import CallCounter
from e2rag.services.http import OpenAICompatibleClient

logger = logging.getLogger(__name__)

SUMMARY_PREFIX = "[SUM]"


class OfflineSummarizer:
    """
    Concatenates its inputs and keeps the first `max_tokens` tokens behind a
    "[SUM]" prefix. Preserves tree structure and call counts, not meaning.
    """

    name = "offline"

    def __init__(
        self,
        counter: Optional[CallCounter] = None,
        max_tokens: int = 200,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    ):
        self.counter = counter or CallCounter()
        self.max_tokens = max_tokens
        self.tokenizer = tokenizer

    def summarize(self, texts: Sequence[str]) -> str:
        if not texts:
            raise ValueError("summarize() needs at least one text")
        self.counter.record_summarizer_call()
        tokens, spaces = self.tokenizer.split(" ".join(texts))
        body = self.tokenizer.join(tokens[: self.max_tokens], spaces[: self.max_tokens])
        return f"{SUMMARY_PREFIX} {body}".rstrip()


class HttpSummarizer:
    """Summarizes with one chat-completion request using a minimal instruction prompt."""

    name = "http"

    def __init__(
        self,
        config: BackendConfig,
        counter: Optional[CallCounter] = None,
        prompt: str = DEFAULT_SUMMARY_PROMPT,
        max_tokens: int = 512,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.config = config
        self.counter = counter or CallCounter()
        self.prompt = prompt
        self.max_tokens = max_tokens
        self._client = OpenAICompatibleClient(config, transport=transport)

    @property
    def identifier(self) -> str:
        return f"http:{self.config.model}"

    def close(self) -> None:
        self._client.close()

    def summarize(self, texts: Sequence[str]) -> str:
        if not texts:
            raise ValueError("summarize() needs at least one text")
        payload = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": self.prompt},
                {"role": "user", "content": "\n\n".join(texts)},
            ],
            "max_tokens": self.max_tokens,
            "temperature": 0,
        }
        self.counter.record_summarizer_call()
        data = self._client.post("/chat/completions", payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise BackendError("chat completion response has no choices[0].message.content") from e
        if not content or not content.strip():
            raise BackendError("chat completion returned an empty summary")
        return content.strip()
