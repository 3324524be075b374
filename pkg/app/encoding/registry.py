"""Variable registry: every decision variable mapped onto its own spin bits.

Bit widths follow the offset-binary protocol.  For the reference layout
(dense layers, sign activations, binary hidden weights) the widths are the
closed forms below; every other variable uses the range rule, which sizes a
variable by the exact reachable range its layer plan reports.

=====================  ==============================  =========  =========
variable               bits                            offset     scale
=====================  ==============================  =========  =========
W1, Wk (hidden)        1                               -1/2       2
b1                     bitlen(n * 2**(B+1))            0          1
s1                     bitlen(n * 2**(B+2))            -n*2**B    1
r1                     bitlen(3n * 2**B)               0          1
t1                     bitlen(3n * 2**(B+1))           0          1
sk (middle)            bitlen(2H)                      -1         1
rk (middle)            bitlen(2H)                      0          1
a                      1                               -1/2       2
WL, bL                 bitlen(2H)                      -H         1/H
y                      bitlen(4H)                      -2H        1/(2H)
=====================  ==============================  =========  =========

``bitlen(x)`` is ``floor(log2 x) + 1``.  Bits are allocated densely in
row order of the table above, then by layer, sample and element.

The closed forms are kept even where they are narrower than the range rule:
r1 and t1 hold at most ``bitlen(3n * 2**B)`` and ``bitlen(3n * 2**(B+1))``
bits, while the largest b1 values push ``|s1|`` past them.  Such parameter
settings have no feasible encoding; ``closed_form_shortfalls`` reports them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from app.encoding.variables import PARAMETER_KINDS, AffineEncoding, VariableKey, VariableKind
from app.errors import EncodingError
from app.poly.polynomial import PseudoBooleanPoly
from app.topology.network import ActivationKind, LossKind, NetworkSpec, ValueRange, plan_network

LOGGER = logging.getLogger(__name__)

_ROW_RANK = {
    "W1": 0,
    "b1": 1,
    "Wk": 2,
    "alpha": 3,
    "WL": 4,
    "bL": 5,
    "s": 6,
    "r": 7,
    "t": 8,
    "a": 9,
    "y": 10,
    "aux": 11,
}

_SLACKED = (ActivationKind.RELU, ActivationKind.LEAKY_RELU, ActivationKind.PRELU, ActivationKind.ABS)
_WITH_ABSVAL = (ActivationKind.SIGN, ActivationKind.RELU, ActivationKind.LEAKY_RELU, ActivationKind.PRELU)


def row_label(key: VariableKey, layers: int) -> str:
    """Spin-budget row a variable is counted under (``s1``/``sk`` style)."""

    kind, layer = key.kind, key.layer
    if kind == VariableKind.WEIGHT:
        return "W1" if layer == 1 else ("WL" if layer == layers else "Wk")
    if kind == VariableKind.BIAS:
        return "b1" if layer == 1 else "bL"
    if kind == VariableKind.SLOPE:
        return "alpha"
    if kind == VariableKind.PREDICTION:
        return "y"
    if kind == VariableKind.POSTACT:
        return "a"
    if kind == VariableKind.REDUCTION_AUX:
        return "aux"
    prefix = {VariableKind.PREACT: "s", VariableKind.ABSVAL: "r", VariableKind.SLACK: "t"}[kind]
    if layer == 1:
        return f"{prefix}1"
    return f"{prefix}L" if layer == layers else f"{prefix}k"


def _sort_key(key: VariableKey, layers: int) -> Tuple[int, int, int, Tuple[int, ...]]:
    label = row_label(key, layers)
    rank = _ROW_RANK.get(label, _ROW_RANK.get(label[0], 11))
    return rank, key.layer, -1 if key.sample is None else key.sample, key.element


def range_encoding(values: ValueRange, first_bit: int) -> AffineEncoding:
    """Smallest offset-binary encoding whose range covers ``values``."""

    lo = values.lo / values.quantum
    hi = values.hi / values.quantum
    span = int(hi - lo)
    return AffineEncoding.offset_binary(first_bit, max(1, span.bit_length()), lo, values.quantum)


def _hinge_absval_range(net: NetworkSpec) -> ValueRange:
    hidden = net.hidden
    width = (4 * hidden).bit_length()
    top = Fraction(2 ** width - 1 - 2 * hidden, 2 * hidden)
    return ValueRange(Fraction(0), 1 + max(Fraction(1), abs(top)), Fraction(1, 2 * hidden))


def _check_element(key: VariableKey, shape: Tuple[int, ...]) -> None:
    if len(key.element) != len(shape) or any(not 0 <= idx < dim for idx, dim in zip(key.element, shape)):
        raise EncodingError(f"{key.label()} is outside the layer shape {shape}")


def encode_variable(key: VariableKey, net: NetworkSpec, first_bit: int = 0) -> AffineEncoding:
    """Encoding of ``key`` for ``net`` with its bits starting at ``first_bit``."""

    kind = key.kind
    hidden, inputs, input_bits, layers = net.hidden, net.inputs, net.input_bits, net.layers
    if kind == VariableKind.REDUCTION_AUX:
        return AffineEncoding.offset_binary(first_bit, 1, Fraction(0), Fraction(1))

    plan = plan_network(net)
    if key.layer == layers:
        out = plan.output
        if kind in (VariableKind.WEIGHT, VariableKind.BIAS):
            _check_element(key, (out.outputs, out.in_width) if kind == VariableKind.WEIGHT else (out.outputs,))
            return AffineEncoding.offset_binary(
                first_bit, (2 * hidden).bit_length(), Fraction(-hidden), Fraction(1, hidden)
            )
        if kind == VariableKind.PREDICTION:
            _check_element(key, (out.outputs,))
            return AffineEncoding.offset_binary(
                first_bit, (4 * hidden).bit_length(), Fraction(-2 * hidden), Fraction(1, 2 * hidden)
            )
        if net.loss == LossKind.HINGE and kind in (VariableKind.ABSVAL, VariableKind.SLACK):
            _check_element(key, (out.outputs,))
            if kind == VariableKind.SLACK:
                return AffineEncoding.signed_unit(first_bit)
            return range_encoding(_hinge_absval_range(net), first_bit)
        raise EncodingError(f"{key.label()} is not a variable of the output layer")

    if not 1 <= key.layer < layers:
        raise EncodingError(f"{key.label()} refers to layer {key.layer} outside 1..{layers}")
    lp = plan.layer(key.layer)
    activation = lp.activation

    if kind == VariableKind.WEIGHT:
        if lp.weight_shape is None:
            raise EncodingError(f"{lp.kind.value} layer {lp.index} has no weights")
        _check_element(key, lp.weight_shape)
        if lp.binary_weights:
            return AffineEncoding.signed_unit(first_bit)
        return range_encoding(lp.weight_range, first_bit)
    if kind == VariableKind.BIAS:
        if lp.frozen_bias is not None:
            raise EncodingError(f"Bias of layer {lp.index} is frozen at {lp.frozen_bias}")
        if not lp.trainable_bias:
            raise EncodingError(f"{lp.kind.value} layer {lp.index} has no bias")
        _check_element(key, (lp.width,))
        bits = (inputs * 2 ** (input_bits + 1)).bit_length()
        return AffineEncoding.offset_binary(first_bit, bits, Fraction(net.first_bias_offset), Fraction(1))
    if kind == VariableKind.SLOPE:
        if activation != ActivationKind.PRELU:
            raise EncodingError(f"Layer {lp.index} has no learnable slope")
        return AffineEncoding.offset_binary(first_bit, net.prelu_bits, Fraction(0), Fraction(1, 2 ** net.prelu_bits))

    _check_element(key, (lp.width,))
    first_layer = lp.index == 1
    if kind == VariableKind.PREACT:
        if lp.reference and first_layer:
            bits = (inputs * 2 ** (input_bits + 2)).bit_length()
            return AffineEncoding.offset_binary(first_bit, bits, Fraction(-inputs * 2 ** input_bits), Fraction(1))
        if lp.reference:
            return AffineEncoding.offset_binary(first_bit, (2 * hidden).bit_length(), Fraction(-1), Fraction(1))
        return range_encoding(lp.preact, first_bit)
    if kind == VariableKind.ABSVAL:
        if activation not in _WITH_ABSVAL:
            raise EncodingError(f"{activation.value} layer {lp.index} has no absolute-value variable")
        if lp.reference and first_layer:
            bits = (3 * inputs * 2 ** input_bits).bit_length()
            return AffineEncoding.offset_binary(first_bit, bits, Fraction(0), Fraction(1))
        if lp.reference:
            return AffineEncoding.offset_binary(first_bit, (2 * hidden).bit_length(), Fraction(0), Fraction(1))
        return range_encoding(ValueRange(Fraction(0), lp.preact.max_abs, lp.preact.quantum), first_bit)
    if kind == VariableKind.SLACK:
        if activation in _SLACKED:
            return AffineEncoding.signed_unit(first_bit)
        if activation != ActivationKind.SIGN or not lp.needs_sign_slack:
            raise EncodingError(f"Layer {lp.index} needs no slack variable")
        if lp.reference and first_layer:
            bits = (3 * inputs * 2 ** (input_bits + 1)).bit_length()
            return AffineEncoding.offset_binary(first_bit, bits, Fraction(0), Fraction(1))
        steps = lp.preact.max_abs / lp.preact.quantum
        return range_encoding(ValueRange(Fraction(0), 2 * steps, Fraction(1)), first_bit)
    if kind == VariableKind.POSTACT:
        if activation == ActivationKind.NONE:
            raise EncodingError(f"Layer {lp.index} has no activation; its output is the pre-activation")
        if activation == ActivationKind.SIGN:
            return AffineEncoding.signed_unit(first_bit)
        return range_encoding(lp.postact, first_bit)
    raise EncodingError(f"{key.label()} is not a variable of hidden layer {lp.index}")


def closed_form_shortfalls(net: NetworkSpec) -> Dict[str, Tuple[Fraction, Fraction]]:
    """Layer-1 closed-form variables too narrow for the values their constraints can demand.

    Maps the row label (``s1``, ``r1``, ``t1``) to ``(needed, encodable)``
    maxima.  Empty unless layer 1 follows the reference layout.
    """

    lp = plan_network(net).layer(1)
    if not lp.reference:
        return {}
    needed = {
        VariableKind.PREACT: lp.preact.hi,
        VariableKind.ABSVAL: lp.preact.max_abs,
    }
    if lp.needs_sign_slack:
        needed[VariableKind.SLACK] = 2 * lp.preact.max_abs / lp.preact.quantum
    shortfalls: Dict[str, Tuple[Fraction, Fraction]] = {}
    for kind, value in needed.items():
        key = VariableKey(kind, 1, 0, (0,))
        enc = encode_variable(key, net)
        if value > enc.max_value:
            shortfalls[row_label(key, net.layers)] = (value, enc.max_value)
    return shortfalls


def registry_keys(net: NetworkSpec, dataset_size: int) -> List[VariableKey]:
    """All variable keys of ``net`` trained on ``dataset_size`` samples, in bit order."""

    plan = plan_network(net)
    keys: List[VariableKey] = []
    for lp in plan.hidden:
        k = lp.index
        if lp.weight_shape is not None:
            rows, cols = lp.weight_shape
            keys.extend(VariableKey(VariableKind.WEIGHT, k, None, (r, c)) for r in range(rows) for c in range(cols))
        if lp.trainable_bias:
            keys.extend(VariableKey(VariableKind.BIAS, k, None, (e,)) for e in range(lp.width))
        if lp.activation == ActivationKind.PRELU:
            keys.append(VariableKey(VariableKind.SLOPE, k))
        per_sample = [VariableKind.PREACT]
        if lp.activation in _WITH_ABSVAL:
            per_sample.append(VariableKind.ABSVAL)
        if lp.activation in _SLACKED or (lp.activation == ActivationKind.SIGN and lp.needs_sign_slack):
            per_sample.append(VariableKind.SLACK)
        if lp.activation != ActivationKind.NONE:
            per_sample.append(VariableKind.POSTACT)
        for i in range(dataset_size):
            for kind in per_sample:
                keys.extend(VariableKey(kind, k, i, (e,)) for e in range(lp.width))

    out = plan.output
    keys.extend(
        VariableKey(VariableKind.WEIGHT, out.index, None, (o, j))
        for o in range(out.outputs)
        for j in range(out.in_width)
    )
    keys.extend(VariableKey(VariableKind.BIAS, out.index, None, (o,)) for o in range(out.outputs))
    output_kinds = [VariableKind.PREDICTION]
    if net.loss == LossKind.HINGE:
        output_kinds += [VariableKind.ABSVAL, VariableKind.SLACK]
    for i in range(dataset_size):
        for kind in output_kinds:
            keys.extend(VariableKey(kind, out.index, i, (o,)) for o in range(out.outputs))
    return sorted(keys, key=lambda key: _sort_key(key, net.layers))


@dataclass(frozen=True)
class VariableRegistry:
    """Immutable map from variable keys to disjoint, densely allocated encodings."""

    entries: Mapping[VariableKey, AffineEncoding]
    num_bits: int
    num_original_bits: int
    layers: int = 2
    _exprs: Dict[VariableKey, PseudoBooleanPoly] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        used = sorted(bit for enc in self.entries.values() for bit in enc.bits)
        if used != list(range(self.num_bits)):
            raise EncodingError("Registry bits must be dense and non-overlapping")

    def __getitem__(self, key: VariableKey) -> AffineEncoding:
        try:
            return self.entries[key]
        except KeyError:
            raise EncodingError(f"Unknown variable {key.label()}") from None

    def __contains__(self, key: object) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[VariableKey]:
        return iter(self.entries)

    def items(self):
        return self.entries.items()

    def get(
        self,
        kind: VariableKind,
        layer: int,
        sample: Optional[int] = None,
        element: Tuple[int, ...] = (),
    ) -> AffineEncoding:
        return self[VariableKey(kind, layer, sample, element)]

    def expr(self, key: VariableKey) -> PseudoBooleanPoly:
        """Affine pseudo-Boolean expression of a variable's value."""

        poly = self._exprs.get(key)
        if poly is None:
            poly = self[key].polynomial()
            self._exprs[key] = poly
        return poly

    def keys_of(self, kind: VariableKind, layer: Optional[int] = None) -> List[VariableKey]:
        return [key for key in self.entries if key.kind == kind and (layer is None or key.layer == layer)]

    @property
    def num_auxiliary_bits(self) -> int:
        return self.num_bits - self.num_original_bits

    @property
    def dataset_size(self) -> int:
        samples = [key.sample for key in self.entries if key.kind == VariableKind.PREDICTION]
        return max(samples) + 1 if samples else 0

    def with_auxiliaries(self, count: int) -> "VariableRegistry":
        """Registry extended by ``count`` one-bit reduction auxiliaries."""

        entries = {key: enc for key, enc in self.entries.items() if key.kind != VariableKind.REDUCTION_AUX}
        for index in range(count):
            bit = self.num_original_bits + index
            entries[VariableKey(VariableKind.REDUCTION_AUX, 0, None, (index,))] = AffineEncoding.offset_binary(
                bit, 1, Fraction(0), Fraction(1)
            )
        return VariableRegistry(entries, self.num_original_bits + count, self.num_original_bits, self.layers)

    def bit_counts(self) -> Dict[str, int]:
        """Spin count per budget row, in allocation order."""

        counts: Dict[str, int] = {}
        for key, enc in self.entries.items():
            label = row_label(key, self.layers)
            counts[label] = counts.get(label, 0) + enc.num_bits
        return counts

    def decode(self, assignment: Sequence[int], parameters_only: bool = False) -> Dict[VariableKey, Fraction]:
        if len(assignment) < self.num_original_bits:
            raise EncodingError(
                f"Assignment has {len(assignment)} bits, registry needs {self.num_original_bits}"
            )
        values = {}
        for key, enc in self.entries.items():
            if key.kind == VariableKind.REDUCTION_AUX:
                continue
            if parameters_only and key.kind not in PARAMETER_KINDS:
                continue
            values[key] = enc.decode(assignment)
        return values


def build_registry(net: NetworkSpec, dataset_size: int) -> VariableRegistry:
    """Allocate bits for every variable of ``net`` over ``dataset_size`` samples."""

    if dataset_size < 1:
        raise EncodingError(f"dataset_size must be >= 1, got {dataset_size}")
    entries: Dict[VariableKey, AffineEncoding] = {}
    next_bit = 0
    for key in registry_keys(net, dataset_size):
        enc = encode_variable(key, net, next_bit)
        entries[key] = enc
        next_bit += enc.num_bits
    registry = VariableRegistry(entries, next_bit, next_bit, net.layers)
    for label, (needed, encodable) in closed_form_shortfalls(net).items():
        LOGGER.warning(
            "%s encodes values up to %s but its constraint can need %s; parameters that reach it are infeasible",
            label,
            encodable,
            needed,
        )
    LOGGER.info("Registry: %s variables over %s bits (N=%s)", len(entries), next_bit, dataset_size)
    return registry
