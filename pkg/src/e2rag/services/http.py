# src/e2rag/services/http.py
"""
OpenAI-compatible HTTP client shared by the remote summarizer and embedder.

Request shapes (see docs/FORMATS.md for the full contract):
    POST {endpoint}/chat/completions  {"model", "messages", "max_tokens", "temperature"}
    POST {endpoint}/embeddings        {"model", "input"}

Both requests are idempotent, so transport errors, 429 and 5xx responses are
retried with exponential backoff. The API key is read from the environment
variable named in the backend config at request time and never logged.
"""

import logging
import os
import threading
import time
from typing import Any, Dict, Optional

import httpx

from e2rag.config import BackendConfig
from e2rag.errors import BackendError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}
BACKOFF_BASE_SECONDS = 0.5


class OpenAICompatibleClient:
    """Synchronous client with bounded in-flight requests and retries."""

    def __init__(self, config: BackendConfig, transport: Optional[httpx.BaseTransport] = None):
        if config.kind != "http":
            raise ValueError("OpenAICompatibleClient requires an http backend config")
        self.config = config
        self.base_url = config.endpoint.rstrip("/")
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._sleep = time.sleep

    def _get_headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.getenv(self.config.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def post(self, path: str, payload: Dict[str, Any]) -> Dict[str, Any]:
        """
        POST a JSON payload and return the decoded JSON response.

        Raises:
            BackendError: after `max_retries` failed attempts, or immediately
                on a non-retryable HTTP status
        """
        url = f"{self.base_url}{path}"
        last_error: Optional[str] = None

        for attempt in range(1, self.config.max_retries + 1):
            try:
                with self._slots:
                    response = self._client.post(url, json=payload, headers=self._get_headers())
                response.raise_for_status()
                return response.json()

            except httpx.HTTPStatusError as e:
                status_code = e.response.status_code
                last_error = f"HTTP {status_code}"
                if status_code not in RETRYABLE_STATUS:
                    logger.error(f"❌ {path} failed with status {status_code} (not retryable)")
                    raise BackendError(f"{url} returned {status_code}") from e
                logger.warning(f"⚠️  {path} attempt {attempt}/{self.config.max_retries} failed with status {status_code}")

            except httpx.RequestError as e:
                last_error = type(e).__name__
                logger.warning(f"⚠️  {path} attempt {attempt}/{self.config.max_retries} failed: {last_error}")

            except ValueError as e:
                raise BackendError(f"{url} returned a non-JSON body") from e

            if attempt < self.config.max_retries:
                self._sleep(BACKOFF_BASE_SECONDS * (2 ** (attempt - 1)))

        logger.error(f"❌ {path} gave up after {self.config.max_retries} attempts ({last_error})")
        raise BackendError(f"{url} failed after {self.config.max_retries} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()
