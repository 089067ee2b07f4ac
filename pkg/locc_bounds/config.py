"""Application configuration settings"""

from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

from locc_bounds import __version__


class Settings(BaseSettings):
    """Settings loaded from environment variables and an optional .env file"""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # App Info
    APP_NAME: str = "locc-bounds"
    APP_VERSION: str = __version__
    DEBUG: bool = False

    # Logging
    LOCC_BOUNDS_LOG_LEVEL: str = "INFO"
    LOCC_BOUNDS_LOG_FILE: Optional[str] = None

    # Worker pool
    LOCC_BOUNDS_THREADS: int = 4

    # Conic solver
    LOCC_BOUNDS_SOLVER: str = "CLARABEL"
    LOCC_BOUNDS_FALLBACK_SOLVER: str = "SCS"
    LOCC_BOUNDS_EPS: float = 1e-6

    # Hierarchies
    LOCC_BOUNDS_SIZE_CAP: int = 20_000_000  # sum of (2 * block_dim)^2
    LOCC_BOUNDS_PPT_ALL_SUBSETS: bool = True

    # See-saw defaults
    LOCC_BOUNDS_SEESAW_RESTARTS: int = 50
    LOCC_BOUNDS_SEESAW_MAX_ITERS: int = 200
    LOCC_BOUNDS_SEESAW_CONV_TOL: float = 1e-8


# Global settings instance
settings = Settings()
