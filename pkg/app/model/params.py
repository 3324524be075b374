"""Decoded network parameters and the parameter file.

Parameter file (UTF-8, one ``key=value`` per line, sorted by layer)::

    # params net.layers=2 net.hidden=1
    scale.W1=2
    W1.0.0=1
    b1.0=0
    alpha1=3/8
    W2.0.0=-1
    b2.0=1/2

``W<k>.<row>.<col>``, ``b<k>.<element>`` and ``alpha<k>`` hold exact
rationals; ``scale.<name>`` records the grid step of the encoding each
group was decoded from.  Frozen middle biases are written too so a file
fully describes the forward function.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

from app.encoding.registry import VariableRegistry
from app.encoding.variables import VariableKey, VariableKind
from app.errors import EncodingError, FormatError
from app.poly.textio import format_rational, parse_rational
from app.topology.network import ActivationKind, NetworkSpec, plan_network

PathLike = Union[str, Path]
Matrix = Tuple[Tuple[Fraction, ...], ...]

_KEY_PATTERN = re.compile(r"^(?:(W)(\d+)\.(\d+)\.(\d+)|(b)(\d+)\.(\d+)|(alpha)(\d+))$")


@dataclass(frozen=True)
class DecodedParameters:
    """Weights, biases and PReLU slopes of every layer, keyed by layer index."""

    net: NetworkSpec
    weights: Dict[int, Matrix]
    biases: Dict[int, Tuple[Fraction, ...]]
    slopes: Dict[int, Fraction] = field(default_factory=dict)
    scales: Dict[str, Fraction] = field(default_factory=dict, compare=False)

    def key(self) -> tuple:
        """Hashable identity of the parameter values."""

        return (
            tuple(sorted(self.weights.items())),
            tuple(sorted(self.biases.items())),
            tuple(sorted(self.slopes.items())),
        )

    def values(self) -> Dict[VariableKey, Fraction]:
        """Values of every trainable parameter, keyed like the registry."""

        plan = plan_network(self.net)
        result: Dict[VariableKey, Fraction] = {}
        trainable_bias = {lp.index for lp in plan.hidden if lp.trainable_bias} | {self.net.layers}
        for k, matrix in self.weights.items():
            for r, row in enumerate(matrix):
                for c, value in enumerate(row):
                    result[VariableKey(VariableKind.WEIGHT, k, None, (r, c))] = value
        for k, vector in self.biases.items():
            if k in trainable_bias:
                for e, value in enumerate(vector):
                    result[VariableKey(VariableKind.BIAS, k, None, (e,))] = value
        for k, value in self.slopes.items():
            result[VariableKey(VariableKind.SLOPE, k)] = value
        return result


def parameters_from_values(
    net: NetworkSpec,
    values: Mapping[VariableKey, Fraction],
    scales: Optional[Dict[str, Fraction]] = None,
) -> DecodedParameters:
    """Assemble parameters from per-key values; frozen middle biases are filled in."""

    plan = plan_network(net)

    def lookup(key: VariableKey) -> Fraction:
        try:
            return Fraction(values[key])
        except KeyError:
            raise EncodingError(f"Missing parameter {key.label()}") from None

    weights: Dict[int, Matrix] = {}
    biases: Dict[int, Tuple[Fraction, ...]] = {}
    slopes: Dict[int, Fraction] = {}
    for lp in plan.hidden:
        k = lp.index
        if lp.weight_shape is not None:
            rows, cols = lp.weight_shape
            weights[k] = tuple(
                tuple(lookup(VariableKey(VariableKind.WEIGHT, k, None, (r, c))) for c in range(cols))
                for r in range(rows)
            )
        if lp.trainable_bias:
            biases[k] = tuple(lookup(VariableKey(VariableKind.BIAS, k, None, (e,))) for e in range(lp.width))
        elif lp.frozen_bias is not None:
            biases[k] = tuple(Fraction(lp.frozen_bias) for _ in range(lp.width))
        if lp.activation == ActivationKind.PRELU:
            slopes[k] = lookup(VariableKey(VariableKind.SLOPE, k))
    out = plan.output
    weights[out.index] = tuple(
        tuple(lookup(VariableKey(VariableKind.WEIGHT, out.index, None, (o, j))) for j in range(out.in_width))
        for o in range(out.outputs)
    )
    biases[out.index] = tuple(lookup(VariableKey(VariableKind.BIAS, out.index, None, (o,))) for o in range(out.outputs))
    return DecodedParameters(net, weights, biases, slopes, dict(scales or {}))


def _scales(registry: VariableRegistry) -> Dict[str, Fraction]:
    scales: Dict[str, Fraction] = {}
    for key, enc in registry.items():
        if key.kind == VariableKind.WEIGHT:
            scales.setdefault(f"W{key.layer}", enc.scale)
        elif key.kind == VariableKind.BIAS:
            scales.setdefault(f"b{key.layer}", enc.scale)
        elif key.kind == VariableKind.SLOPE:
            scales.setdefault(f"alpha{key.layer}", enc.scale)
    return scales


def decode(assignment: Sequence[int], registry: VariableRegistry, net: NetworkSpec) -> DecodedParameters:
    """Parameters encoded by ``assignment``; reduction auxiliaries are ignored."""

    values = registry.decode(assignment, parameters_only=True)
    return parameters_from_values(net, values, _scales(registry))


def dumps_params(params: DecodedParameters) -> str:
    net = params.net
    lines = [f"# params net.layers={net.layers} net.hidden={net.hidden} net.inputs={net.inputs}"]
    lines.extend(f"scale.{name}={format_rational(value)}" for name, value in sorted(params.scales.items()))
    for k in sorted(params.weights):
        for r, row in enumerate(params.weights[k]):
            lines.extend(f"W{k}.{r}.{c}={format_rational(value)}" for c, value in enumerate(row))
        if k in params.biases:
            lines.extend(f"b{k}.{e}={format_rational(value)}" for e, value in enumerate(params.biases[k]))
        if k in params.slopes:
            lines.append(f"alpha{k}={format_rational(params.slopes[k])}")
    return "\n".join(lines) + "\n"


def loads_params(lines: Iterable[str], net: NetworkSpec, source: Optional[PathLike] = None) -> DecodedParameters:
    values: Dict[VariableKey, Fraction] = {}
    scales: Dict[str, Fraction] = {}
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        name, sep, value_text = text.partition("=")
        if not sep:
            raise FormatError(f"Expected 'key=value', got {text!r}", path=source, line=lineno)
        name = name.strip()
        try:
            value = parse_rational(value_text.strip())
        except ValueError as exc:
            raise FormatError(str(exc), path=source, line=lineno) from exc
        if name.startswith("scale."):
            scales[name[len("scale."):]] = value
            continue
        match = _KEY_PATTERN.match(name)
        if match is None:
            raise FormatError(f"Unknown parameter key {name!r}", path=source, line=lineno)
        groups = match.groups()
        if groups[0]:
            key = VariableKey(VariableKind.WEIGHT, int(groups[1]), None, (int(groups[2]), int(groups[3])))
        elif groups[4]:
            key = VariableKey(VariableKind.BIAS, int(groups[5]), None, (int(groups[6]),))
        else:
            key = VariableKey(VariableKind.SLOPE, int(groups[8]))
        values[key] = value
    try:
        return parameters_from_values(net, values, scales)
    except EncodingError as exc:
        raise FormatError(str(exc), path=source) from exc


def write_params(params: DecodedParameters, path: PathLike) -> None:
    Path(path).write_text(dumps_params(params), encoding="utf-8")


def read_params(path: PathLike, net: NetworkSpec) -> DecodedParameters:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        return loads_params(handle, net, source=path)
