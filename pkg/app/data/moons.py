"""Two interleaved half-circles."""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from app.data.dataset import QuantizedDataset
from app.data.quantize import quantize
from app.errors import DataError

LOGGER = logging.getLogger(__name__)

CENTER = np.array([0.5, 0.25])


def two_moon_raw(n_samples: int, noise: float = 0.1, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Points on the outer arc ``(cos t, sin t)`` labelled +1 and on the inner
    arc ``(1 - cos t, 1/2 - sin t)`` labelled -1, ``t`` evenly spaced on ``[0, pi]``,
    plus isotropic Gaussian noise."""

    if n_samples < 2 or n_samples % 2:
        raise DataError(f"n_samples must be even and >= 2, got {n_samples}")
    if noise < 0:
        raise DataError("noise must be non-negative")
    half = n_samples // 2
    t = np.linspace(0.0, np.pi, half)
    outer = np.column_stack([np.cos(t), np.sin(t)])
    inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    points = np.vstack([outer, inner])
    labels = np.concatenate([np.ones(half), -np.ones(half)])
    if noise > 0:
        rng = np.random.default_rng(seed)
        points = points + rng.normal(scale=noise, size=points.shape)
    return points, labels


def two_moon(n_samples: int, noise: float = 0.1, seed: int = 0, input_bits: int = 3) -> QuantizedDataset:
    """Two-moon points centred and scaled onto the integer grid ``[-2**B, 2**B]``."""

    points, labels = two_moon_raw(n_samples, noise, seed)
    centred = points - CENTER
    reach = float(np.abs(centred).max())
    scale = 2 ** input_bits / reach if reach > 0 else 1.0
    LOGGER.info("Generated %s two-moon samples (noise=%s, seed=%s)", n_samples, noise, seed)
    return quantize(
        centred,
        labels.reshape(-1, 1),
        input_bits,
        scale=scale,
        provenance={"generator": "two_moon", "n_samples": n_samples, "noise": noise, "seed": seed},
    )
