# -*- coding: utf-8 -*-
"""
Process-wide settings using Pydantic BaseSettings.

Per-run experiment parameters live in YAML files (see ``models.py``); this
module only holds what the environment controls: logging, parallelism,
output root and a few numeric defaults.
"""
from pathlib import Path
from typing import Literal

from pydantic import model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Central configuration loaded from ``CKD_*`` environment variables.
    Pydantic's BaseSettings provides validation, type casting and
    reading from .env files.
    """

    # Logging
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "INFO"
    LOG_JSON: bool = True

    # Ablation process pool size; unset defers to the suite file, then 1
    WORKERS: int | None = None

    # Outputs
    OUT_ROOT: Path = Path("out")
    # Off by default so reruns are byte-identical
    EMBED_TIMESTAMP: bool = False

    # Numerics
    GRAD_CHECK_EPSILON: float = 1e-5
    # Fraction of the bin-grid diagonal
    PCK_THRESHOLD: float = 0.05
    # A batch loss above this aborts training as diverged
    MAX_LOSS: float = 1e6

    # ==========================================================================
    # Paths (computed, not from env vars)
    # ==========================================================================
    BASE_DIR: Path = Path(__file__).resolve().parent
    TEMPLATES_DIR: Path = BASE_DIR / "templates"
    PLOTS_DIR: Path = TEMPLATES_DIR / "plots"

    @model_validator(mode="after")
    def validate_ranges(self) -> "Settings":
        """Reject settings that would make runs meaningless."""
        if self.WORKERS is not None and self.WORKERS < 1:
            raise ValueError("CKD_WORKERS must be >= 1")
        if not 0 < self.GRAD_CHECK_EPSILON <= 1e-2:
            raise ValueError("CKD_GRAD_CHECK_EPSILON must lie in (0, 1e-2]")
        if self.MAX_LOSS <= 0:
            raise ValueError("CKD_MAX_LOSS must be positive")
        if self.PCK_THRESHOLD <= 0:
            raise ValueError("CKD_PCK_THRESHOLD must be positive")
        return self

    model_config = SettingsConfigDict(
        env_prefix="CKD_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# Global configuration instance
settings = Settings()
