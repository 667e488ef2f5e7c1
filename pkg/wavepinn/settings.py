from functools import lru_cache

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()


class Settings(BaseSettings):
    """Process-wide settings read from WAVEPINN_* environment variables."""

    model_config = SettingsConfigDict(env_prefix="WAVEPINN_", extra="ignore")

    workers: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    output_dir: str = "runs"
    # Evaluation chunk size is fixed independently of the worker count so results never
    # depend on how many threads ran them.
    chunk_size: int = Field(default=1024, ge=1)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
