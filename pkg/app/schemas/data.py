"""Dataset generation and preprocessing configuration models."""

from __future__ import annotations

from typing import Tuple

from pydantic import BaseModel, Field, model_validator

from app.config import settings


class MnistConfig(BaseModel):
    """Binarize, crop, split into a 2x2 patch grid and map white fractions to -1/0/+1."""

    digits: Tuple[int, int] = (6, 9)
    binarize_threshold: int = Field(default_factory=lambda: settings.binarize_threshold, ge=0, le=255)
    patch_grid: Tuple[int, int] = (2, 2)
    tri_level_low: float = Field(default_factory=lambda: settings.tri_level_low, ge=0.0, le=1.0)
    tri_level_high: float = Field(default_factory=lambda: settings.tri_level_high, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self) -> "MnistConfig":
        if not self.tri_level_low < self.tri_level_high:
            raise ValueError("tri_level_low must be below tri_level_high")
        if self.digits[0] == self.digits[1] or not all(0 <= d <= 9 for d in self.digits):
            raise ValueError(f"digits must be two distinct values in 0..9, got {self.digits}")
        if min(self.patch_grid) < 1:
            raise ValueError("patch_grid entries must be >= 1")
        return self


class TwoMoonConfig(BaseModel):
    n_samples: int = Field(default=50, ge=2)
    noise: float = Field(default=0.1, ge=0.0)
    seed: int = Field(default=0, ge=0)
    input_bits: int = Field(default=3, ge=0, le=16)

    @model_validator(mode="after")
    def _check_even(self) -> "TwoMoonConfig":
        if self.n_samples % 2:
            raise ValueError("n_samples must be even")
        return self
