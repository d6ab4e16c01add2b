from __future__ import annotations

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Process-wide numeric defaults. Every value can be overridden with a
    LOGDIV_* environment variable or a .env file; explicit keyword arguments
    to library functions always win over these.
    """

    model_config = SettingsConfigDict(
        env_prefix="LOGDIV_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # App
    app_name: str = Field(default="logdiv")
    log: str = Field(default="WARNING", description="Log level name (env LOGDIV_LOG)")

    # Domains
    eps_domain: float = Field(default=1e-9, description="Interior margin for open sets")

    # Finite differences
    h_grad: float = 1e-5
    h_hess: float = 1e-4

    # Linear algebra
    pd_tol: float = Field(default=1e-10, description="Smallest admissible eigenvalue")

    # Newton inversion of the alpha-gradient
    newton_tol: float = 1e-10
    newton_max_iter: int = 100
    newton_max_halvings: int = 60

    # Geodesic time change
    quad_tol: float = 1e-10
    quad_max_panels: int = 65536

    # Dual segments / ties / cache
    n_check: int = 33
    tie_tol: float = 1e-12
    cache_decimals: int = 12
    cache_max: int = Field(default=4096, ge=1, description="Most recently used dual pairs kept per DualPair")

    # Report suites
    max_workers: int = 4


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
