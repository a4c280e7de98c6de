"""
ccsim Configuration

Settings for the simulator, sweeps and logging
"""

import logging
import sys
from functools import lru_cache

import structlog  # type: ignore[import-untyped]
from pydantic import field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
_MAX_SEED = 2**64 - 1


class Settings(BaseSettings):
    """ccsim Settings"""

    # Sweeps
    threads: int = 1  # CCSIM_THREADS caps sweep parallelism
    default_samples: int = 100
    default_seed: int = 0

    # Observability
    log_level: str = "WARNING"
    log_format: str = "console"  # "console" or "json"
    metrics_path: str | None = None  # Prometheus text file written after a sweep

    model_config = SettingsConfigDict(
        env_prefix="CCSIM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        """Accept any casing of the standard level names."""
        level = str(v).strip().upper()
        if level not in _LOG_LEVELS:
            raise ValueError(f"log_level must be one of {', '.join(_LOG_LEVELS)}")
        return level

    @field_validator("log_format", mode="before")
    @classmethod
    def normalize_log_format(cls, v: str) -> str:
        fmt = str(v).strip().lower()
        if fmt not in ("console", "json"):
            raise ValueError("log_format must be 'console' or 'json'")
        return fmt

    @model_validator(mode="after")
    def validate_ranges(self) -> "Settings":
        """Fail fast on nonsensical sweep settings."""
        errors: list[str] = []

        if self.threads < 1:
            errors.append("CCSIM_THREADS must be at least 1.")
        if self.default_samples < 1:
            errors.append("CCSIM_DEFAULT_SAMPLES must be at least 1.")
        if not 0 <= self.default_seed <= _MAX_SEED:
            errors.append("CCSIM_DEFAULT_SEED must be an unsigned 64-bit integer.")

        if errors:
            raise ValueError(
                "Configuration errors detected:\n" + "\n".join(f"  - {e}" for e in errors)
            )

        return self


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


def configure_logging(settings: Settings | None = None) -> None:
    """
    Wire structlog for command-line use.

    Library code only ever calls ``structlog.get_logger()``; this is invoked once
    by the CLI before any work starts.
    """
    settings = settings or get_settings()
    level = getattr(logging, settings.log_level)
    logging.basicConfig(format="%(message)s", level=level)

    renderer = (
        structlog.processors.JSONRenderer()
        if settings.log_format == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
