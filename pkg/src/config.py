"""Toolkit configuration settings."""
from functools import lru_cache
from pydantic import BaseSettings


class Settings(BaseSettings):
    """Toolkit settings loaded from PRAC_* environment variables."""

    # Application
    app_name: str = "PRAC toolkit"
    debug: bool = False

    # Logging
    log_level: str = "INFO"
    log_json: bool = True

    # Reproducibility (PRAC_SEED)
    seed: int = 0
    default_trials: int = 100

    # Fountain coding
    fountain_c: float = 0.03
    fountain_delta: float = 0.5
    nominal_overhead: float = 0.05

    # Networked runtime
    net_timeout_s: float = 120.0
    rtt_refresh_frames: int = 50
    rtt_smoothing: float = 0.125
    connect_retries: int = 50
    connect_retry_delay_s: float = 0.1

    class Config:
        env_prefix = "PRAC_"
        env_file = ".env"
        case_sensitive = False
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
