"""Exhaustive constrained baseline over the whole parameter space."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

from app.config import settings
from app.data.dataset import QuantizedDataset
from app.encoding.registry import VariableRegistry
from app.encoding.variables import PARAMETER_KINDS
from app.errors import SolverCapError, SolverError
from app.model.canonical import canonicalize
from app.model.forward import honest_assignment, loss_value
from app.model.params import DecodedParameters, parameters_from_values
from app.topology.network import LayerType, NetworkSpec

LOGGER = logging.getLogger(__name__)


@dataclass
class OptimalParameters:
    """Minimum loss over representable parameters and every parameter set reaching it."""

    loss: Fraction
    optima: List[DecodedParameters]
    evaluated: int
    representable: int


def enumerate_optimal_parameters(
    net: NetworkSpec,
    dataset: QuantizedDataset,
    registry: VariableRegistry,
    max_bits: Optional[int] = None,
) -> OptimalParameters:
    """Try every encodable parameter set whose forward values all fit their encodings.

    Optima are canonicalized and deduplicated when every hidden layer is dense.
    """

    keys = [key for key in registry if key.kind in PARAMETER_KINDS]
    bits = sum(registry[key].num_bits for key in keys)
    cap = settings.exact_max_vars if max_bits is None else max_bits
    if bits > cap:
        raise SolverCapError(f"Parameter space has {bits} bits, enumeration is capped at {cap}")
    dense = all(spec.kind == LayerType.DENSE for spec in net.layer_kinds)
    best: Optional[Fraction] = None
    optima = {}
    evaluated = representable = 0
    for combo in itertools.product(*(list(registry[key].values()) for key in keys)):
        evaluated += 1
        params = parameters_from_values(net, dict(zip(keys, combo)))
        if honest_assignment(params, dataset, registry) is None:
            continue
        representable += 1
        loss = loss_value(params, dataset)
        if best is not None and loss > best:
            continue
        if best is None or loss < best:
            best = loss
            optima = {}
        form = canonicalize(params) if dense else params
        optima.setdefault(form.key(), form)
    if best is None:
        raise SolverError("No parameter set has representable forward values")
    LOGGER.info(
        "Enumerated %s parameter sets (%s representable): minimum loss %s, %s optima",
        evaluated,
        representable,
        best,
        len(optima),
    )
    return OptimalParameters(best, [optima[key] for key in sorted(optima)], evaluated, representable)
