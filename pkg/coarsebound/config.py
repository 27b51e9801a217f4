import logging
import sys
from functools import lru_cache

import structlog
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="COARSEBOUND_", extra="ignore")
    ball_cap: int = 5_000_000
    flow_scale: int = 10**6
    max_scale: int = 10**12
    scale_retries: int = 2
    rel_tol: float = 1e-4
    max_doublings: int = 60
    cg_rtol: float = 1e-12
    gap_residual: float = 1e-8
    max_inverse_iterations: int = 5000
    transfer_tolerance: float = 1e-9
    subset_scan_cap: int = 22
    linear_slack: int = 2
    trend_exponent: float = 0.5
    seed: int = 0
    jobs: int = 1
    log_level: str = "WARNING"
    log_json: bool = False


@lru_cache
def get_settings() -> Settings:
    return Settings()


def configure_logging(level: str | None = None, json: bool | None = None) -> None:
    """Route structlog to stderr so stdout artifacts stay deterministic."""
    settings = get_settings()
    level_name = (level or settings.log_level).upper()
    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if (settings.log_json if json is None else json)
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(logging.getLevelName(level_name)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
