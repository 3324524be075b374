"""Success probability and time-to-solution."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

from app.errors import MetricDomainError

TARGET_CONFIDENCE = 0.99

Number = Union[int, float, Fraction]


def success_probability(report) -> Fraction:
    """Fraction of restarts whose best rescaled energy reached zero loss."""

    return report.success_probability()


def tts(p_s: Number, t_com: Number, clamp: bool = True) -> float:
    """``t_com * log(1 - 0.99) / log(1 - p_s)``.

    With ``clamp`` on, any ``p_s >= 0.99`` (including 1) returns ``t_com``:
    a single trial already meets the confidence target.
    """

    p = float(p_s)
    t = float(t_com)
    if not 0 <= p <= 1:
        raise MetricDomainError(f"success probability must lie in [0, 1], got {p}")
    if t <= 0:
        raise MetricDomainError(f"t_com must be positive, got {t}")
    if p == 0:
        raise MetricDomainError("TTS is undefined for a success probability of 0")
    if clamp and p >= TARGET_CONFIDENCE:
        return t
    if p == 1:
        raise MetricDomainError("TTS is undefined for a success probability of 1 without clamping")
    return t * math.log(1 - TARGET_CONFIDENCE) / math.log(1 - p)
