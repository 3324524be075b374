"""Equality constraints describing the feedforward pass.

Every scalar equation becomes one polynomial ``lhs - rhs`` that must be
zero.  Builders are pure per (layer, sample); the returned sets are sorted
into (kind, layer, sample, element) order so compilation is deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from app.data.dataset import QuantizedDataset
from app.encoding.registry import VariableRegistry
from app.encoding.variables import VariableKey, VariableKind
from app.errors import ConfigError, DataError, UnsupportedModuleError
from app.poly.polynomial import PseudoBooleanPoly, residual_quantum
from app.topology.network import (
    OUT_OF_SCOPE_LAYERS,
    ActivationKind,
    LayerPlan,
    LayerType,
    NetworkPlan,
    NetworkSpec,
    parse_activation,
    plan_network,
)

LOGGER = logging.getLogger(__name__)

KIND_ORDER = (
    "linear",
    "conv",
    "avgpool",
    "batchnorm",
    "sign_product",
    "sign_slack",
    "relu_mean",
    "relu_product",
    "leaky_mix",
    "leaky_product",
    "abs_product",
    "hinge",
)


@dataclass(frozen=True)
class ConstraintTag:
    kind: str
    layer: int
    sample: int
    element: int

    def sort_key(self) -> Tuple[int, int, int, int]:
        return KIND_ORDER.index(self.kind), self.layer, self.sample, self.element

    def __str__(self) -> str:
        return f"{self.kind}(layer={self.layer}, sample={self.sample}, element={self.element})"


@dataclass
class ConstraintSet:
    """Polynomials asserted equal to zero, each with its provenance tag."""

    constraints: List[PseudoBooleanPoly] = field(default_factory=list)
    provenance: List[ConstraintTag] = field(default_factory=list)

    def add(self, tag: ConstraintTag, poly: PseudoBooleanPoly) -> None:
        self.constraints.append(poly)
        self.provenance.append(tag)

    def extend(self, other: "ConstraintSet") -> None:
        self.constraints.extend(other.constraints)
        self.provenance.extend(other.provenance)

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self) -> Iterator[Tuple[ConstraintTag, PseudoBooleanPoly]]:
        return iter(zip(self.provenance, self.constraints))

    def sorted(self) -> "ConstraintSet":
        order = sorted(range(len(self)), key=lambda idx: self.provenance[idx].sort_key())
        return ConstraintSet([self.constraints[idx] for idx in order], [self.provenance[idx] for idx in order])

    def residuals(self, assignment: Sequence[int]) -> List[Fraction]:
        return [poly.evaluate(assignment) for poly in self.constraints]

    def violations(self, assignment: Sequence[int]) -> List[ConstraintTag]:
        return [tag for tag, poly in self if poly.evaluate(assignment) != 0]

    def min_quantum(self) -> Fraction:
        """Smallest non-zero |residual| any constraint can take."""

        quanta = [residual_quantum(poly) for poly in self.constraints if not poly.is_zero()]
        return min(quanta) if quanta else Fraction(1)

    @property
    def max_degree(self) -> int:
        return max((poly.degree for poly in self.constraints), default=0)

    def count_by_kind(self) -> dict:
        counts: dict = {}
        for tag in self.provenance:
            counts[tag.kind] = counts.get(tag.kind, 0) + 1
        return counts


def check_dataset(net: NetworkSpec, registry: VariableRegistry, dataset: QuantizedDataset) -> None:
    if dataset.num_inputs != net.inputs:
        raise DataError(f"Dataset has {dataset.num_inputs} inputs, network expects {net.inputs}")
    if dataset.num_outputs != net.outputs:
        raise DataError(f"Dataset has {dataset.num_outputs} labels per sample, network expects {net.outputs}")
    if registry.dataset_size != dataset.size:
        raise ConfigError(f"Registry was built for {registry.dataset_size} samples, dataset has {dataset.size}")
    bound = 2 ** net.input_bits
    for index, row in enumerate(dataset.inputs):
        for element, value in enumerate(row):
            if abs(value) > bound:
                raise DataError(
                    f"Sample {index} input {element} is {value}, outside [-{bound}, {bound}] for input_bits={net.input_bits}"
                )


def layer_output(
    registry: VariableRegistry,
    plan: NetworkPlan,
    dataset: QuantizedDataset,
    layer: int,
    sample: int,
    element: int,
) -> PseudoBooleanPoly:
    """Value fed forward by ``layer`` (0 is the input layer)."""

    if layer == 0:
        return PseudoBooleanPoly.constant(dataset.inputs[sample][element])
    lp = plan.layer(layer)
    kind = VariableKind.PREACT if lp.activation == ActivationKind.NONE else VariableKind.POSTACT
    return registry.expr(VariableKey(kind, layer, sample, (element,)))


def _weight(registry: VariableRegistry, layer: int, row: int, col: int) -> PseudoBooleanPoly:
    return registry.expr(VariableKey(VariableKind.WEIGHT, layer, None, (row, col)))


def _preact(registry: VariableRegistry, layer: int, sample: int, element: int) -> PseudoBooleanPoly:
    return registry.expr(VariableKey(VariableKind.PREACT, layer, sample, (element,)))


def build_linear_constraints(
    net: NetworkSpec, registry: VariableRegistry, dataset: QuantizedDataset
) -> ConstraintSet:
    """Dense-layer equations ``W a + b - s = 0`` and the output ``W a + b - y_hat = 0``."""

    check_dataset(net, registry, dataset)
    plan = plan_network(net)
    result = ConstraintSet()
    for lp in plan.hidden:
        if lp.kind != LayerType.DENSE:
            continue
        for i in range(dataset.size):
            inputs = [layer_output(registry, plan, dataset, lp.index - 1, i, j) for j in range(lp.in_width)]
            for e in range(lp.width):
                if lp.trainable_bias:
                    total = registry.expr(VariableKey(VariableKind.BIAS, lp.index, None, (e,)))
                else:
                    total = PseudoBooleanPoly.constant(lp.frozen_bias)
                for j, value in enumerate(inputs):
                    total = total + _weight(registry, lp.index, e, j) * value
                result.add(ConstraintTag("linear", lp.index, i, e), total - _preact(registry, lp.index, i, e))

    out = plan.output
    for i in range(dataset.size):
        inputs = [layer_output(registry, plan, dataset, out.index - 1, i, j) for j in range(out.in_width)]
        for o in range(out.outputs):
            total = registry.expr(VariableKey(VariableKind.BIAS, out.index, None, (o,)))
            for j, value in enumerate(inputs):
                total = total + _weight(registry, out.index, o, j) * value
            prediction = registry.expr(VariableKey(VariableKind.PREDICTION, out.index, i, (o,)))
            result.add(ConstraintTag("linear", out.index, i, o), total - prediction)
    return result


def _parse_layer_kind(layer_kind: Union[str, LayerType]) -> LayerType:
    if isinstance(layer_kind, LayerType):
        return layer_kind
    key = str(layer_kind).strip().lower()
    if key in OUT_OF_SCOPE_LAYERS:
        raise UnsupportedModuleError(
            f"{key} layers are out of scope: only dense, conv2d, avgpool and batchnorm have equality constraints"
        )
    try:
        return LayerType(key)
    except ValueError:
        raise ConfigError(f"Unknown layer kind {layer_kind!r}") from None


def _conv_constraints(lp: LayerPlan, plan: NetworkPlan, registry, dataset, result: ConstraintSet) -> None:
    kh, kw = lp.spec.kernel
    _, in_cols = lp.in_shape
    rows, cols = lp.out_shape
    for i in range(dataset.size):
        for r in range(rows):
            for c in range(cols):
                e = r * cols + c
                total = PseudoBooleanPoly.zero()
                for u in range(kh):
                    for v in range(kw):
                        source = layer_output(registry, plan, dataset, lp.index - 1, i, (r + u) * in_cols + c + v)
                        total = total + _weight(registry, lp.index, 0, u * kw + v) * source
                result.add(ConstraintTag("conv", lp.index, i, e), total - _preact(registry, lp.index, i, e))


def _avgpool_constraints(lp: LayerPlan, plan: NetworkPlan, registry, dataset, result: ConstraintSet) -> None:
    wh, ww = lp.spec.window
    sh, sw = lp.spec.stride
    _, in_cols = lp.in_shape
    rows, cols = lp.out_shape
    weight = Fraction(1, wh * ww)
    for i in range(dataset.size):
        for r in range(rows):
            for c in range(cols):
                e = r * cols + c
                total = PseudoBooleanPoly.zero()
                for u in range(wh):
                    for v in range(ww):
                        total = total + layer_output(
                            registry, plan, dataset, lp.index - 1, i, (r * sh + u) * in_cols + c * sw + v
                        )
                result.add(ConstraintTag("avgpool", lp.index, i, e), total * weight - _preact(registry, lp.index, i, e))


def _batchnorm_constraints(lp: LayerPlan, plan: NetworkPlan, registry, dataset, result: ConstraintSet) -> None:
    means = lp.spec.mean if len(lp.spec.mean) > 1 else lp.spec.mean * lp.width
    stds = lp.spec.std if len(lp.spec.std) > 1 else lp.spec.std * lp.width
    for i in range(dataset.size):
        for e in range(lp.width):
            source = layer_output(registry, plan, dataset, lp.index - 1, i, e)
            residual = source - means[e] - _preact(registry, lp.index, i, e) * stds[e]
            result.add(ConstraintTag("batchnorm", lp.index, i, e), residual)


def build_structured_layer_constraints(
    layer_kind: Union[str, LayerType],
    net: NetworkSpec,
    registry: VariableRegistry,
    dataset: QuantizedDataset,
) -> ConstraintSet:
    """Unrolled convolution, average-pool and frozen batchnorm equations."""

    kind = _parse_layer_kind(layer_kind)
    if kind == LayerType.DENSE:
        return build_linear_constraints(net, registry, dataset)
    check_dataset(net, registry, dataset)
    plan = plan_network(net)
    builders = {
        LayerType.CONV2D: _conv_constraints,
        LayerType.AVGPOOL: _avgpool_constraints,
        LayerType.BATCHNORM: _batchnorm_constraints,
    }
    result = ConstraintSet()
    for lp in plan.hidden:
        if lp.kind == kind:
            builders[kind](lp, plan, registry, dataset, result)
    return result


def _activation_key(kind: VariableKind, lp: LayerPlan, sample: int, element: int) -> VariableKey:
    return VariableKey(kind, lp.index, sample, (element,))


def build_activation_constraints(
    kind: Union[str, ActivationKind],
    net: NetworkSpec,
    registry: VariableRegistry,
    dataset: QuantizedDataset,
) -> ConstraintSet:
    """Equations tying ``a`` to ``s`` for every hidden layer using ``kind``."""

    activation = kind if isinstance(kind, ActivationKind) else parse_activation(kind)
    check_dataset(net, registry, dataset)
    plan = plan_network(net)
    result = ConstraintSet()
    for lp in plan.hidden:
        if lp.activation != activation or activation == ActivationKind.NONE:
            continue
        slope: Optional[PseudoBooleanPoly] = None
        if activation == ActivationKind.PRELU:
            slope = registry.expr(VariableKey(VariableKind.SLOPE, lp.index))
        for i in range(dataset.size):
            for e in range(lp.width):
                s = registry.expr(_activation_key(VariableKind.PREACT, lp, i, e))
                a = registry.expr(_activation_key(VariableKind.POSTACT, lp, i, e))
                if activation == ActivationKind.ABS:
                    g = registry.expr(_activation_key(VariableKind.SLACK, lp, i, e))
                    result.add(ConstraintTag("abs_product", lp.index, i, e), g * s - a)
                    continue
                r = registry.expr(_activation_key(VariableKind.ABSVAL, lp, i, e))
                if activation == ActivationKind.SIGN:
                    result.add(ConstraintTag("sign_product", lp.index, i, e), a * s - r)
                    if lp.needs_sign_slack:
                        t = registry.expr(_activation_key(VariableKind.SLACK, lp, i, e))
                        steps = r * (1 / lp.preact.quantum)
                        result.add(ConstraintTag("sign_slack", lp.index, i, e), a + steps * 2 - 1 - t)
                    continue
                t = registry.expr(_activation_key(VariableKind.SLACK, lp, i, e))
                if activation == ActivationKind.RELU:
                    result.add(ConstraintTag("relu_mean", lp.index, i, e), (r + s) * Fraction(1, 2) - a)
                    result.add(ConstraintTag("relu_product", lp.index, i, e), t * s - r)
                    continue
                if slope is None:
                    alpha = PseudoBooleanPoly.constant(net.leaky_alpha)
                else:
                    alpha = slope
                mix = (1 - alpha) * t * Fraction(1, 2) + (1 + alpha) * Fraction(1, 2)
                result.add(ConstraintTag("leaky_mix", lp.index, i, e), mix * s - a)
                result.add(ConstraintTag("leaky_product", lp.index, i, e), t * s - r)
    return result


def build_constraints(net: NetworkSpec, registry: VariableRegistry, dataset: QuantizedDataset) -> ConstraintSet:
    """All feedforward and loss constraints in deterministic order."""

    from app.topology.losses import build_loss

    plan = plan_network(net)
    result = build_linear_constraints(net, registry, dataset)
    for layer_kind in sorted({lp.kind for lp in plan.hidden if lp.kind != LayerType.DENSE}, key=lambda k: k.value):
        result.extend(build_structured_layer_constraints(layer_kind, net, registry, dataset))
    for activation in sorted({lp.activation for lp in plan.hidden}, key=lambda k: k.value):
        result.extend(build_activation_constraints(activation, net, registry, dataset))
    result.extend(build_loss(net.loss, registry, dataset).constraints)
    ordered = result.sorted()
    LOGGER.info("Built %s constraints: %s", len(ordered), ordered.count_by_kind())
    return ordered
