"""Rounding raw features onto the integer input grid."""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from app.data.dataset import QuantizedDataset
from app.errors import DataError

LOGGER = logging.getLogger(__name__)


def round_half_away(values: np.ndarray) -> np.ndarray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def _as_label(value: object) -> Fraction:
    if isinstance(value, Fraction):
        return value
    return Fraction(float(value)).limit_denominator(1 << 20)


def quantize(
    inputs: Sequence[Sequence[float]],
    labels: Sequence[Sequence[object]],
    input_bits: int,
    scale: float = 1.0,
    provenance: Optional[Mapping[str, object]] = None,
) -> QuantizedDataset:
    """Round ``inputs * scale`` half away from zero and clamp to ``[-2**B, 2**B]``.

    Labels are divided by ``max(1, max|y|)`` so they land in ``[-1, 1]``.
    """

    raw = np.asarray(inputs, dtype=np.float64)
    if raw.ndim == 1:
        raw = raw.reshape(-1, 1)
    if not np.all(np.isfinite(raw)):
        raise DataError("Inputs contain NaN or infinite values")
    if any(not np.isfinite(float(value)) for row in labels for value in row):
        raise DataError("Labels contain NaN or infinite values")
    label_rows = [[_as_label(value) for value in row] for row in labels]
    if len(label_rows) != raw.shape[0]:
        raise DataError(f"{raw.shape[0]} input rows but {len(label_rows)} label rows")

    bound = 2 ** input_bits
    rounded = round_half_away(raw * scale)
    clamped = np.clip(rounded, -bound, bound)
    hits = int(np.count_nonzero(clamped != rounded))
    if hits:
        LOGGER.warning("Clamped %s input values to [-%s, %s]", hits, bound, bound)

    peak = max((abs(value) for row in label_rows for value in row), default=Fraction(0))
    divisor = max(Fraction(1), peak)
    scaled_labels = tuple(tuple(value / divisor for value in row) for row in label_rows)

    meta = {key: str(value) for key, value in (provenance or {}).items()}
    meta.setdefault("input_bits", str(input_bits))
    meta.setdefault("scale", repr(float(scale)))
    return QuantizedDataset(
        inputs=tuple(tuple(int(value) for value in row) for row in clamped.astype(np.int64)),
        labels=scaled_labels,
        input_bits=input_bits,
        provenance=meta,
    )


def requantize(dataset: QuantizedDataset, input_bits: Optional[int] = None) -> QuantizedDataset:
    """Run an existing dataset through ``quantize`` again (a no-op when it is already on grid)."""

    return quantize(
        dataset.inputs,
        dataset.labels,
        dataset.input_bits if input_bits is None else input_bits,
        provenance=dataset.provenance,
    )
