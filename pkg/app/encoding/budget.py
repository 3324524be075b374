"""Closed-form spin accounting for the reference layout.

These formulas are written independently of ``build_registry`` so the two
can check each other.
"""

from __future__ import annotations

import math
from typing import Dict

from app.errors import ConfigError
from app.topology.network import NetworkSpec


def _bitlen(value: int) -> int:
    return int(value).bit_length()


def spin_counts(net: NetworkSpec, dataset_size: int) -> Dict[str, int]:
    """Spin count per budget row for an all-dense, all-sign, binary-weight net."""

    if not net.is_reference:
        raise ConfigError("Closed-form spin counts only cover dense sign networks with binary hidden weights")
    if net.loss.value != "mse":
        raise ConfigError("Closed-form spin counts assume the MSE loss")
    n, m, H, L, B, N = net.inputs, net.outputs, net.hidden, net.layers, net.input_bits, dataset_size
    middle = L - 2
    counts = {
        "W1": H * n,
        "b1": H * _bitlen(n * 2 ** (B + 1)),
        "Wk": H * H * middle,
        "WL": m * H * _bitlen(2 * H),
        "bL": m * _bitlen(2 * H),
        "s1": N * H * _bitlen(n * 2 ** (B + 2)),
        "sk": N * H * middle * _bitlen(2 * H),
        "r1": N * H * _bitlen(3 * n * 2 ** B),
        "rk": N * H * middle * _bitlen(2 * H),
        "t1": N * H * _bitlen(3 * n * 2 ** (B + 1)),
        "a": N * H * (L - 1),
        "y": N * m * _bitlen(4 * H),
    }
    return {row: count for row, count in counts.items() if count}


def total_spins(net: NetworkSpec, dataset_size: int) -> int:
    return sum(spin_counts(net, dataset_size).values())


def complexity_term(hidden: int, layers: int, dataset_size: int) -> float:
    """Dominant growth term ``H^2 L + H L N log2 H``."""

    return hidden * hidden * layers + hidden * layers * dataset_size * math.log2(hidden)
