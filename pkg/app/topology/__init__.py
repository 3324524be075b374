"""Network descriptions and their constraint representation.

Only the dependency-free pieces are re-exported here; import
``app.topology.constraints`` and ``app.topology.losses`` directly.
"""

from app.topology.netfile import read_network, parse_network
from app.topology.network import (
    ActivationKind,
    FrozenConfig,
    LayerSpec,
    LayerType,
    LossKind,
    NetworkSpec,
    ValueRange,
    plan_network,
)

__all__ = [
    "ActivationKind",
    "FrozenConfig",
    "LayerSpec",
    "LayerType",
    "LossKind",
    "NetworkSpec",
    "ValueRange",
    "parse_network",
    "plan_network",
    "read_network",
]
