# src/e2rag/config.py
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

DEFAULT_SUMMARY_PROMPT = (
    "Summarize the following passages into one concise paragraph. "
    "Keep names, places and events."
)


class BackendConfig(BaseModel):
    """Connection settings for one backend role (summarizer or embedder)."""
    kind: Literal["offline", "http"] = "offline"
    endpoint: Optional[str] = Field(None, description="Base URL of an OpenAI-compatible API")
    model: Optional[str] = None
    timeout: float = Field(60.0, gt=0)
    max_retries: int = Field(3, ge=1)
    api_key_env: str = "OPENAI_API_KEY"
    max_in_flight: int = Field(4, ge=1)

    @model_validator(mode="after")
    def check_network_fields(self):
        if self.kind == "http" and (not self.endpoint or not self.model):
            raise ValueError("http backends require both endpoint and model")
        return self


class Settings(BaseSettings):
    # Logging
    LOG_LEVEL: str = "INFO"

    # Chunking
    CHUNK_SIZE: int = 1200
    OVERLAP: int = 100

    # Summary tree
    GROUP_SIZE: int = 8
    BUILD_TO_ROOT: bool = False
    GROUPING: Literal["carry", "ceil"] = "carry"
    INDEX_WORKERS: int = 4

    # Retrieval
    TOP_K: int = 8
    HOP: int = 4
    LOOP_THRESHOLD: int = 25

    # Summarizer backend
    SUMMARIZER_KIND: Literal["offline", "http"] = "offline"
    SUMMARIZER_ENDPOINT: Optional[str] = None
    SUMMARIZER_MODEL: Optional[str] = None
    SUMMARY_PROMPT: str = DEFAULT_SUMMARY_PROMPT
    SUMMARY_MAX_TOKENS: int = 512
    OFFLINE_SUMMARY_TOKENS: int = 200

    # Embedder backend
    EMBEDDER_KIND: Literal["offline", "http"] = "offline"
    EMBEDDER_ENDPOINT: Optional[str] = None
    EMBEDDER_MODEL: Optional[str] = None
    EMBED_DIM: int = 256
    EMBED_BATCH_SIZE: int = 64

    # Shared HTTP behaviour (the key itself is never stored here)
    BACKEND_TIMEOUT: float = 60.0
    BACKEND_MAX_RETRIES: int = 3
    API_KEY_ENV: str = "OPENAI_API_KEY"
    MAX_IN_FLIGHT: int = 4

    # Entity extraction
    NOUN_LEXICON: Optional[Path] = None
    EXTRACTOR_COMMAND: Optional[str] = None

    # Persistence
    RECORD_TIMINGS: bool = False

    model_config = SettingsConfigDict(
        env_prefix="E2RAG_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )

    def summarizer_backend(self) -> BackendConfig:
        return BackendConfig(
            kind=self.SUMMARIZER_KIND,
            endpoint=self.SUMMARIZER_ENDPOINT,
            model=self.SUMMARIZER_MODEL,
            timeout=self.BACKEND_TIMEOUT,
            max_retries=self.BACKEND_MAX_RETRIES,
            api_key_env=self.API_KEY_ENV,
            max_in_flight=self.MAX_IN_FLIGHT,
        )

    def embedder_backend(self) -> BackendConfig:
        return BackendConfig(
            kind=self.EMBEDDER_KIND,
            endpoint=self.EMBEDDER_ENDPOINT,
            model=self.EMBEDDER_MODEL,
            timeout=self.BACKEND_TIMEOUT,
            max_retries=self.BACKEND_MAX_RETRIES,
            api_key_env=self.API_KEY_ENV,
            max_in_flight=self.MAX_IN_FLIGHT,
        )


def load_settings(config_file: Optional[Path] = None) -> Settings:
    """Build settings from the environment, optionally layering a KEY=value file."""
    if config_file is not None:
        return Settings(_env_file=config_file)
    return Settings()
