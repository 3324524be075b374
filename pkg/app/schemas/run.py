"""Run and solver configuration models."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from app.config import settings


class AnnealSchedule(BaseModel):
    """Simulated-annealing schedule; unset fields are derived from the instance."""

    sweeps: Optional[int] = Field(default=None, ge=1)
    beta_start: Optional[float] = Field(default=None, gt=0)
    beta_end: Optional[float] = Field(default=None, gt=0)
    restarts: int = Field(default_factory=lambda: settings.default_restarts, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    time_budget_ms: Optional[float] = Field(default=None, gt=0)
    quench: bool = True

    @model_validator(mode="after")
    def _check_betas(self) -> "AnnealSchedule":
        if self.beta_start is not None and self.beta_end is not None and self.beta_end < self.beta_start:
            raise ValueError("beta_end must be >= beta_start")
        return self


class RunConfig(BaseModel):
    """Everything one ``train`` invocation needs."""

    net_path: Path
    data_path: Path
    test_data_path: Optional[Path] = None
    out_dir: Path = Field(default_factory=lambda: settings.output_dir)
    rho: Optional[str] = None
    lambda_policy: str = "auto"
    schedule: AnnealSchedule = Field(default_factory=AnnealSchedule)
    exact: bool = False

    @model_validator(mode="after")
    def _check_paths(self) -> "RunConfig":
        for name in ("net_path", "data_path", "test_data_path"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ValueError(f"{name} {path} does not exist")
        return self
