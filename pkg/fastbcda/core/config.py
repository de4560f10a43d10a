"""Runtime settings loaded from the environment and an optional .env file."""

from functools import lru_cache
from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide defaults; every field maps to a FASTBCDA_* variable."""

    model_config = SettingsConfigDict(
        env_prefix="FASTBCDA_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    log_level: str = Field(default="INFO", description="Root log level")
    log_format: Literal["json", "text"] = Field(
        default="json", description="Log line format"
    )
    log_file: Optional[str] = Field(
        default=None, description="Optional log file path"
    )
    default_tol: float = Field(
        default=1e-6, gt=0, description="KKT stopping tolerance"
    )
    default_max_outer: int = Field(
        default=1000, ge=1, description="Outer iteration cap"
    )
    bench_workers: int = Field(
        default=1, ge=1, description="Concurrent benchmark cells"
    )
    power_iter_tol: float = Field(
        default=1e-10, gt=0, description="Power iteration relative tolerance"
    )
    power_iter_max: int = Field(
        default=10_000, ge=1, description="Power iteration cap"
    )


@lru_cache
def get_settings() -> Settings:
    """Return the cached settings instance."""
    return Settings()
