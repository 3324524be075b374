"""Exact forward inference over decoded parameters.

All arithmetic uses ``Fraction`` so every intermediate value can be compared
with the constraint variables bit for bit.  ``sign(0) = +1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from app.data.dataset import QuantizedDataset
from app.encoding.registry import VariableRegistry
from app.encoding.variables import VariableKey, VariableKind
from app.errors import EncodingError
from app.model.params import DecodedParameters
from app.topology.network import ActivationKind, LayerPlan, LayerType, LossKind, plan_network

LOGGER = logging.getLogger(__name__)

ONE = Fraction(1)


def sign(value: Fraction) -> Fraction:
    return ONE if value >= 0 else -ONE


@dataclass
class LayerTrace:
    """Per-element values of one hidden layer: pre-activation, output and auxiliaries."""

    preact: List[Fraction]
    postact: List[Fraction]
    absval: List[Fraction] = field(default_factory=list)
    slack: List[Fraction] = field(default_factory=list)


@dataclass
class ForwardTrace:
    layers: List[LayerTrace]
    outputs: Tuple[Fraction, ...]


def _preactivation(lp: LayerPlan, params: DecodedParameters, inputs: Sequence[Fraction]) -> List[Fraction]:
    k = lp.index
    if lp.kind == LayerType.DENSE:
        weights, biases = params.weights[k], params.biases[k]
        return [sum((w * a for w, a in zip(weights[e], inputs)), biases[e]) for e in range(lp.width)]
    if lp.kind == LayerType.CONV2D:
        kh, kw = lp.spec.kernel
        _, in_cols = lp.in_shape
        rows, cols = lp.out_shape
        kernel = params.weights[k][0]
        return [
            sum(
                (kernel[u * kw + v] * inputs[(r + u) * in_cols + c + v] for u in range(kh) for v in range(kw)),
                Fraction(0),
            )
            for r in range(rows)
            for c in range(cols)
        ]
    if lp.kind == LayerType.AVGPOOL:
        wh, ww = lp.spec.window
        sh, sw = lp.spec.stride
        _, in_cols = lp.in_shape
        rows, cols = lp.out_shape
        return [
            sum(
                (inputs[(r * sh + u) * in_cols + c * sw + v] for u in range(wh) for v in range(ww)),
                Fraction(0),
            )
            / (wh * ww)
            for r in range(rows)
            for c in range(cols)
        ]
    means = lp.spec.mean if len(lp.spec.mean) > 1 else lp.spec.mean * lp.width
    stds = lp.spec.std if len(lp.spec.std) > 1 else lp.spec.std * lp.width
    return [(inputs[e] - means[e]) / stds[e] for e in range(lp.width)]


def _activate(lp: LayerPlan, params: DecodedParameters, preact: List[Fraction]) -> LayerTrace:
    activation = lp.activation
    if activation == ActivationKind.NONE:
        return LayerTrace(preact=preact, postact=list(preact))
    if activation == ActivationKind.ABS:
        return LayerTrace(preact=preact, postact=[abs(s) for s in preact], slack=[sign(s) for s in preact])
    absval = [abs(s) for s in preact]
    if activation == ActivationKind.SIGN:
        postact = [sign(s) for s in preact]
        slack: List[Fraction] = []
        if lp.needs_sign_slack:
            quantum = lp.preact.quantum
            slack = [a + 2 * r / quantum - 1 for a, r in zip(postact, absval)]
        return LayerTrace(preact=preact, postact=postact, absval=absval, slack=slack)
    if activation == ActivationKind.RELU:
        alpha = Fraction(0)
    elif activation == ActivationKind.LEAKY_RELU:
        alpha = params.net.leaky_alpha
    else:
        alpha = params.slopes[lp.index]
    postact = [s if s >= 0 else alpha * s for s in preact]
    return LayerTrace(preact=preact, postact=postact, absval=absval, slack=[sign(s) for s in preact])


def forward_trace(params: DecodedParameters, x: Sequence[int]) -> ForwardTrace:
    """Every intermediate value of one forward pass."""

    plan = plan_network(params.net)
    values: List[Fraction] = [Fraction(value) for value in x]
    layers: List[LayerTrace] = []
    for lp in plan.hidden:
        trace = _activate(lp, params, _preactivation(lp, params, values))
        layers.append(trace)
        values = trace.postact
    out = plan.output
    weights, biases = params.weights[out.index], params.biases[out.index]
    outputs = tuple(sum((w * a for w, a in zip(weights[o], values)), biases[o]) for o in range(out.outputs))
    return ForwardTrace(layers=layers, outputs=outputs)


def forward(params: DecodedParameters, x: Sequence[int]) -> Tuple[Fraction, ...]:
    return forward_trace(params, x).outputs


def _hinge_terms(label: Fraction, prediction: Fraction) -> Tuple[Fraction, Fraction]:
    margin = 1 - label * prediction
    return abs(margin), sign(margin)


def variable_value(
    key: VariableKey,
    params: DecodedParameters,
    traces: Sequence[ForwardTrace],
    dataset: QuantizedDataset,
) -> Fraction:
    """Value a forward pass assigns to one registry variable."""

    kind, layer = key.kind, key.layer
    if kind == VariableKind.WEIGHT:
        r, c = key.element
        return params.weights[layer][r][c]
    if kind == VariableKind.BIAS:
        return params.biases[layer][key.element[0]]
    if kind == VariableKind.SLOPE:
        return params.slopes[layer]
    trace = traces[key.sample]
    element = key.element[0]
    if layer == params.net.layers:
        prediction = trace.outputs[element]
        if kind == VariableKind.PREDICTION:
            return prediction
        absval, slack = _hinge_terms(dataset.labels[key.sample][element], prediction)
        return absval if kind == VariableKind.ABSVAL else slack
    lt = trace.layers[layer - 1]
    if kind == VariableKind.PREACT:
        return lt.preact[element]
    if kind == VariableKind.POSTACT:
        return lt.postact[element]
    if kind == VariableKind.ABSVAL:
        return lt.absval[element]
    if kind == VariableKind.SLACK:
        return lt.slack[element]
    raise EncodingError(f"{key.label()} has no forward-pass value")


def honest_assignment(
    params: DecodedParameters,
    dataset: QuantizedDataset,
    registry: VariableRegistry,
) -> Optional[List[int]]:
    """Bits of the original variables encoding ``params`` and its forward passes.

    Returns ``None`` when some forward value falls outside its encoding.
    """

    traces = [forward_trace(params, x) for x in dataset.inputs]
    bits = [0] * registry.num_original_bits
    for key, enc in registry.items():
        if key.kind == VariableKind.REDUCTION_AUX:
            continue
        value = variable_value(key, params, traces, dataset)
        try:
            encoded = enc.encode(value)
        except EncodingError:
            LOGGER.debug("%s=%s is not representable", key.label(), value)
            return None
        for bit, bit_value in zip(enc.bits, encoded):
            bits[bit] = bit_value
    return bits


def loss_value(params: DecodedParameters, dataset: QuantizedDataset) -> Fraction:
    """Training loss of ``params`` on ``dataset`` under the network's loss kind."""

    total = Fraction(0)
    for x, labels in zip(dataset.inputs, dataset.labels):
        outputs = forward(params, x)
        for y, prediction in zip(labels, outputs):
            if params.net.loss == LossKind.HINGE:
                total += max(Fraction(0), 1 - y * prediction)
            else:
                total += (y - prediction) ** 2
    return total / dataset.size
