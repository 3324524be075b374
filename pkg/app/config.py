"""Process-wide defaults for compiling, solving and preprocessing.

Built on pydantic's ``BaseSettings``. The settings object is imported by the compiler, the
solvers and the CLI so that defaults (solver caps, annealing schedule
scaling, MNIST preprocessing thresholds) are consistent across commands.
Every field can be overridden with an ``ISING_LEARN_``-prefixed environment
variable, e.g. ``ISING_LEARN_DATA_DIR``.
"""

from functools import lru_cache
from pathlib import Path

try:
    from pydantic_settings import BaseSettings
except ImportError:  # pragma: no cover - fallback for Pydantic v1 environments
    from pydantic import BaseSettings  # type: ignore

from pydantic import Field


class Settings(BaseSettings):
    """Runtime configuration loaded from environment variables."""

    data_dir: Path = Field(
        default=Path("data"),
        description="Dataset cache holding the MNIST IDX files.",
    )
    output_dir: Path = Field(
        default=Path("runs"),
        description="Default directory for compiled artifacts and reports.",
    )
    exact_max_vars: int = Field(
        default=24,
        ge=1,
        le=40,
        description="Largest block the exhaustive solver will enumerate.",
    )
    default_restarts: int = Field(default=100, ge=1)
    sweeps_per_var: int = Field(
        default=10,
        ge=1,
        description="Default annealing sweeps per restart, per QUBO variable.",
    )
    hot_acceptance: float = Field(
        default=0.5,
        gt=0.0,
        lt=1.0,
        description="Acceptance probability of the largest uphill move at the start of annealing.",
    )
    cold_acceptance: float = Field(
        default=0.01,
        gt=0.0,
        lt=1.0,
        description="Acceptance probability of the smallest uphill move at the end of annealing.",
    )
    nominal_trial_ms: float = Field(
        default=700.0,
        gt=0.0,
        description="Computation time per trial used for TTS when no time budget is set.",
    )
    prelu_bits: int = Field(default=3, ge=1, le=8)
    hidden_weight_bits: int = Field(default=2, ge=2, le=8)
    binarize_threshold: int = Field(default=127, ge=0, le=255)
    tri_level_low: float = Field(default=0.1, ge=0.0, le=1.0)
    tri_level_high: float = Field(default=0.35, ge=0.0, le=1.0)
    mnist_base_url: str = Field(
        default="https://ossci-datasets.s3.amazonaws.com/mnist/",
        description="Mirror serving the gzip-compressed MNIST IDX files.",
    )
    http_timeout: float = Field(
        default=60.0,
        description="HTTP timeout in seconds for dataset downloads.",
    )
    log_level: str = Field(default="INFO")

    class Config:
        env_prefix = "ISING_LEARN_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return the process-wide settings; call ``get_settings.cache_clear()`` after changing the environment."""

    return Settings()


settings = get_settings()
