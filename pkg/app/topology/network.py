"""Network description and per-layer value-range planning.

``NetworkSpec`` is the architecture (layer count, widths, input bit width,
activations, loss and per-layer kinds).  ``plan_network`` turns it into a
sequence of ``LayerPlan`` objects carrying the exact reachable range and
grid quantum of every intermediate quantity.  The encoding module sizes its
bit widths from these ranges, and the constraint builders use the plans to
decide which auxiliary variables and equations a layer needs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence, Tuple

from app.errors import ConfigError, UnsupportedModuleError
from app.poly.polynomial import rational_gcd

LOGGER = logging.getLogger(__name__)


class ActivationKind(str, Enum):
    SIGN = "sign"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    PRELU = "prelu"
    ABS = "abs"
    NONE = "none"


class LossKind(str, Enum):
    MSE = "mse"
    HINGE = "hinge"


class LayerType(str, Enum):
    DENSE = "dense"
    CONV2D = "conv2d"
    AVGPOOL = "avgpool"
    BATCHNORM = "batchnorm"


UNSUPPORTED_ACTIVATIONS = ("tanh", "sigmoid", "elu", "softmax")
UNSUPPORTED_LOSSES = ("cross_entropy",)
OUT_OF_SCOPE_LAYERS = ("maxpool", "recurrent", "attention")


def parse_activation(name: str) -> ActivationKind:
    key = str(name).strip().lower().replace("-", "_")
    try:
        return ActivationKind(key)
    except ValueError:
        if key in UNSUPPORTED_ACTIVATIONS:
            raise UnsupportedModuleError(
                f"non-polynomial activation {name!r}; unsupported activations are "
                f"{', '.join(UNSUPPORTED_ACTIVATIONS)}"
            ) from None
        raise ConfigError(
            f"Unknown activation {name!r}; expected one of {', '.join(kind.value for kind in ActivationKind)}"
        ) from None


def parse_loss(name: str) -> LossKind:
    key = str(name).strip().lower().replace("-", "_")
    try:
        return LossKind(key)
    except ValueError:
        if key in UNSUPPORTED_LOSSES:
            raise UnsupportedModuleError(
                f"non-polynomial loss {name!r}; unsupported losses are {', '.join(UNSUPPORTED_LOSSES)}"
            ) from None
        raise ConfigError(f"Unknown loss {name!r}; expected one of mse, hinge") from None


@dataclass(frozen=True)
class LayerSpec:
    """Kind and hyper-parameters of one hidden layer."""

    kind: LayerType = LayerType.DENSE
    kernel: Optional[Tuple[int, int]] = None
    window: Optional[Tuple[int, int]] = None
    stride: Optional[Tuple[int, int]] = None
    mean: Tuple[Fraction, ...] = ()
    std: Tuple[Fraction, ...] = ()
    activation: Optional[ActivationKind] = None

    def __post_init__(self) -> None:
        if self.kind == LayerType.CONV2D and not self.kernel:
            raise ConfigError("conv2d layers need a kernel shape")
        if self.kind == LayerType.AVGPOOL:
            if not self.window:
                raise ConfigError("avgpool layers need a window shape")
            if self.stride is None:
                object.__setattr__(self, "stride", self.window)
        for dims in (self.kernel, self.window, self.stride):
            if dims is not None and (len(dims) != 2 or min(dims) < 1):
                raise ConfigError(f"Invalid 2-D shape {dims!r}")
        object.__setattr__(self, "mean", tuple(Fraction(value) for value in self.mean))
        object.__setattr__(self, "std", tuple(Fraction(value) for value in self.std))
        if any(value <= 0 for value in self.std):
            raise ConfigError("batchnorm standard deviations must be positive")


@dataclass(frozen=True)
class FrozenConfig:
    """Values fixed by configuration rather than learned."""

    middle_bias: int
    binary_weights_except_last: bool = True

    @classmethod
    def for_width(cls, hidden: int, binary_weights_except_last: bool = True) -> "FrozenConfig":
        return cls(middle_bias=hidden - 1, binary_weights_except_last=binary_weights_except_last)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of the quantized network.

    ``layers`` counts the output layer, so ``layers=2`` is one hidden layer.
    ``layer_kinds`` describes hidden layers 1..L-1; an empty tuple means all
    dense.  The output layer is always dense without activation.
    """

    layers: int
    hidden: int
    inputs: int
    outputs: int = 1
    input_bits: int = 0
    hidden_activation: ActivationKind = ActivationKind.SIGN
    loss: LossKind = LossKind.MSE
    layer_kinds: Tuple[LayerSpec, ...] = ()
    input_shape: Optional[Tuple[int, int]] = None
    binary_weights_except_last: bool = True
    hidden_weight_bits: int = 2
    first_bias_offset: int = 0
    leaky_alpha: Fraction = Fraction(1, 4)
    prelu_bits: int = 3

    def __post_init__(self) -> None:
        if self.layers < 2:
            raise ConfigError(f"A network needs at least 2 layers, got {self.layers}")
        if min(self.hidden, self.inputs, self.outputs) < 1:
            raise ConfigError("hidden, inputs and outputs must all be >= 1")
        if self.input_bits < 0:
            raise ConfigError("input_bits must be >= 0")
        if self.hidden_weight_bits < 2:
            raise ConfigError("hidden_weight_bits must be >= 2")
        if self.prelu_bits < 1:
            raise ConfigError("prelu_bits must be >= 1")
        object.__setattr__(self, "hidden_activation", ActivationKind(self.hidden_activation))
        object.__setattr__(self, "loss", LossKind(self.loss))
        object.__setattr__(self, "leaky_alpha", Fraction(self.leaky_alpha))
        if not 0 <= self.leaky_alpha < 1:
            raise ConfigError("leaky_alpha must lie in [0, 1)")
        kinds = tuple(self.layer_kinds) or tuple(LayerSpec() for _ in range(self.layers - 1))
        if len(kinds) != self.layers - 1:
            raise ConfigError(f"Expected {self.layers - 1} hidden layer kinds, got {len(kinds)}")
        object.__setattr__(self, "layer_kinds", kinds)
        if self.input_shape is not None:
            rows, cols = self.input_shape
            if rows * cols != self.inputs:
                raise ConfigError(f"input_shape {rows}x{cols} does not match inputs={self.inputs}")

    @property
    def frozen(self) -> FrozenConfig:
        return FrozenConfig.for_width(self.hidden, self.binary_weights_except_last)

    def layer(self, k: int) -> LayerSpec:
        if not 1 <= k <= self.layers - 1:
            raise ConfigError(f"Hidden layer index {k} out of range 1..{self.layers - 1}")
        return self.layer_kinds[k - 1]

    def activation(self, k: int) -> ActivationKind:
        spec = self.layer(k)
        if spec.activation is not None:
            return spec.activation
        if spec.kind == LayerType.AVGPOOL:
            return ActivationKind.NONE
        return self.hidden_activation

    @property
    def is_reference(self) -> bool:
        """True for the all-dense, all-sign, binary-weight layout."""

        return self.binary_weights_except_last and all(
            spec.kind == LayerType.DENSE for spec in self.layer_kinds
        ) and all(self.activation(k) == ActivationKind.SIGN for k in range(1, self.layers))

    def with_layer(self, k: int, spec: LayerSpec) -> "NetworkSpec":
        kinds = list(self.layer_kinds)
        kinds[k - 1] = spec
        return replace(self, layer_kinds=tuple(kinds))


@dataclass(frozen=True)
class ValueRange:
    """Values ``quantum * j`` for integers ``j`` with ``lo <= quantum * j <= hi``."""

    lo: Fraction
    hi: Fraction
    quantum: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        object.__setattr__(self, "quantum", Fraction(self.quantum))
        if self.quantum <= 0:
            raise ConfigError("Range quantum must be positive")
        if self.lo > self.hi:
            raise ConfigError(f"Empty range [{self.lo}, {self.hi}]")
        if (self.lo / self.quantum).denominator != 1 or (self.hi / self.quantum).denominator != 1:
            raise ConfigError(f"Range [{self.lo}, {self.hi}] is not on the {self.quantum} grid")

    @property
    def max_abs(self) -> Fraction:
        return max(abs(self.lo), abs(self.hi))

    @property
    def steps(self) -> int:
        return int((self.hi - self.lo) / self.quantum)

    def contains(self, value: Fraction) -> bool:
        value = Fraction(value)
        return self.lo <= value <= self.hi and ((value - self.lo) / self.quantum).denominator == 1


SIGNED_UNIT = ValueRange(Fraction(-1), Fraction(1), Fraction(1))


@dataclass(frozen=True)
class LayerPlan:
    """Resolved shapes, ranges and auxiliary needs of one hidden layer."""

    index: int
    spec: LayerSpec
    activation: ActivationKind
    in_width: int
    width: int
    in_shape: Optional[Tuple[int, int]]
    out_shape: Optional[Tuple[int, int]]
    weight_shape: Optional[Tuple[int, int]]
    weight_range: Optional[ValueRange]
    binary_weights: bool
    trainable_bias: bool
    frozen_bias: Optional[int]
    input_range: ValueRange
    input_signed_unit: bool
    preact: ValueRange
    postact: ValueRange
    reference: bool
    needs_sign_slack: bool

    @property
    def kind(self) -> LayerType:
        return self.spec.kind


@dataclass(frozen=True)
class OutputPlan:
    index: int
    in_width: int
    outputs: int
    input_range: ValueRange


@dataclass(frozen=True)
class NetworkPlan:
    net: NetworkSpec
    hidden: Tuple[LayerPlan, ...]
    output: OutputPlan
    input_range: ValueRange

    def layer(self, k: int) -> LayerPlan:
        return self.hidden[k - 1]


def _weight_range(net: NetworkSpec) -> ValueRange:
    if net.binary_weights_except_last:
        return SIGNED_UNIT
    half = 2 ** (net.hidden_weight_bits - 1)
    return ValueRange(Fraction(-half), Fraction(half - 1), Fraction(1))


def _postact_range(net: NetworkSpec, activation: ActivationKind, preact: ValueRange) -> ValueRange:
    if activation == ActivationKind.SIGN:
        return SIGNED_UNIT
    if activation in (ActivationKind.RELU, ActivationKind.ABS):
        hi = preact.max_abs if activation == ActivationKind.ABS else max(Fraction(0), preact.hi)
        return ValueRange(Fraction(0), hi, preact.quantum)
    if activation == ActivationKind.LEAKY_RELU:
        alpha = net.leaky_alpha
        quantum = preact.quantum / alpha.denominator

        def leaky(value: Fraction) -> Fraction:
            return value if value >= 0 else alpha * value

        return ValueRange(leaky(preact.lo), leaky(preact.hi), quantum)
    if activation == ActivationKind.PRELU:
        alpha_max = Fraction(2 ** net.prelu_bits - 1, 2 ** net.prelu_bits)
        lo = preact.lo if preact.lo >= 0 else alpha_max * preact.lo
        hi = max(Fraction(0), preact.hi)
        return ValueRange(lo, hi, preact.quantum / 2 ** net.prelu_bits)
    return preact


def _batchnorm_range(spec: LayerSpec, width: int, prev: ValueRange) -> ValueRange:
    if not spec.mean or not spec.std:
        raise ConfigError("batchnorm layer has no frozen statistics")
    means = spec.mean if len(spec.mean) > 1 else spec.mean * width
    stds = spec.std if len(spec.std) > 1 else spec.std * width
    if len(means) != width or len(stds) != width:
        raise ConfigError(f"batchnorm statistics must have 1 or {width} entries")
    quanta = [rational_gcd([prev.quantum, mu]) / sigma for mu, sigma in zip(means, stds)]
    lows = [(prev.lo - mu) / sigma for mu, sigma in zip(means, stds)]
    highs = [(prev.hi - mu) / sigma for mu, sigma in zip(means, stds)]
    return ValueRange(min(lows), max(highs), rational_gcd(quanta))


@lru_cache(maxsize=64)
def plan_network(net: NetworkSpec) -> NetworkPlan:
    """Resolve every hidden layer's shapes, ranges and auxiliary needs."""

    input_range = ValueRange(Fraction(-(2 ** net.input_bits)), Fraction(2 ** net.input_bits), Fraction(1))
    prev_range = input_range
    prev_width = net.inputs
    prev_shape = net.input_shape
    prev_signed_unit = False
    plans = []
    for k in range(1, net.layers):
        spec = net.layer(k)
        activation = net.activation(k)
        weight_range: Optional[ValueRange] = None
        weight_shape: Optional[Tuple[int, int]] = None
        trainable_bias = False
        frozen_bias: Optional[int] = None
        out_shape: Optional[Tuple[int, int]] = None
        terms = 0

        if spec.kind == LayerType.DENSE:
            width = net.hidden
            weight_range = _weight_range(net)
            weight_shape = (width, prev_width)
            terms = prev_width
            reach = prev_width * weight_range.max_abs * prev_range.max_abs
            if k == 1:
                trainable_bias = True
                bias_bits = (net.inputs * 2 ** (net.input_bits + 1)).bit_length()
                bias_lo = Fraction(net.first_bias_offset)
                bias_hi = bias_lo + 2 ** bias_bits - 1
                preact = ValueRange(-reach + bias_lo, reach + bias_hi, prev_range.quantum)
            else:
                frozen_bias = net.frozen.middle_bias
                quantum = rational_gcd([prev_range.quantum, frozen_bias])
                preact = ValueRange(-reach + frozen_bias, reach + frozen_bias, quantum)
        elif spec.kind == LayerType.CONV2D:
            if prev_shape is None:
                raise ConfigError(f"conv2d layer {k} needs a 2-D input shape")
            kh, kw = spec.kernel
            rows, cols = prev_shape[0] - kh + 1, prev_shape[1] - kw + 1
            if rows < 1 or cols < 1:
                raise ConfigError(f"conv2d kernel {kh}x{kw} larger than its {prev_shape[0]}x{prev_shape[1]} input")
            out_shape = (rows, cols)
            width = rows * cols
            weight_range = _weight_range(net)
            weight_shape = (1, kh * kw)
            terms = kh * kw
            reach = terms * weight_range.max_abs * prev_range.max_abs
            preact = ValueRange(-reach, reach, prev_range.quantum)
        elif spec.kind == LayerType.AVGPOOL:
            if prev_shape is None:
                raise ConfigError(f"avgpool layer {k} needs a 2-D input shape")
            wh, ww = spec.window
            sh, sw = spec.stride
            rows, cols = (prev_shape[0] - wh) // sh + 1, (prev_shape[1] - ww) // sw + 1
            if rows < 1 or cols < 1:
                raise ConfigError(f"avgpool window {wh}x{ww} larger than its input")
            out_shape = (rows, cols)
            width = rows * cols
            preact = ValueRange(prev_range.lo, prev_range.hi, prev_range.quantum / (wh * ww))
        else:
            width = prev_width
            out_shape = prev_shape
            preact = _batchnorm_range(spec, width, prev_range)

        binary = weight_range is not None and net.binary_weights_except_last
        parity_guaranteed = (
            k >= 2
            and binary
            and prev_signed_unit
            and (terms + (frozen_bias or 0)) % 2 == 1
        )
        reference = (
            spec.kind == LayerType.DENSE
            and binary
            and activation == ActivationKind.SIGN
            and (k == 1 or (prev_signed_unit and prev_width == net.hidden))
        )
        postact = _postact_range(net, activation, preact)
        plans.append(
            LayerPlan(
                index=k,
                spec=spec,
                activation=activation,
                in_width=prev_width,
                width=width,
                in_shape=prev_shape,
                out_shape=out_shape,
                weight_shape=weight_shape,
                weight_range=weight_range,
                binary_weights=binary,
                trainable_bias=trainable_bias,
                frozen_bias=frozen_bias,
                input_range=prev_range,
                input_signed_unit=prev_signed_unit,
                preact=preact,
                postact=postact,
                reference=reference,
                needs_sign_slack=activation == ActivationKind.SIGN and not parity_guaranteed,
            )
        )
        LOGGER.debug(
            "Layer %s: %s/%s width=%s preact=[%s, %s] step %s",
            k,
            spec.kind.value,
            activation.value,
            width,
            preact.lo,
            preact.hi,
            preact.quantum,
        )
        prev_range = postact
        prev_width = width
        prev_shape = out_shape
        prev_signed_unit = activation == ActivationKind.SIGN

    output = OutputPlan(index=net.layers, in_width=prev_width, outputs=net.outputs, input_range=prev_range)
    return NetworkPlan(net=net, hidden=tuple(plans), output=output, input_range=input_range)


def with_input_statistics(net: NetworkSpec, inputs: Sequence[Sequence[int]], max_denominator: int = 8) -> NetworkSpec:
    """Fill a layer-1 batchnorm's missing mean/std from the training inputs.

    Statistics are rounded to rationals with denominator at most
    ``max_denominator`` so the normalized grid stays coarse.
    """

    spec = net.layer(1)
    if spec.kind != LayerType.BATCHNORM or (spec.mean and spec.std):
        return net
    if not inputs:
        raise ConfigError("Cannot derive batchnorm statistics from an empty dataset")
    count = len(inputs)
    means = []
    stds = []
    for column in zip(*inputs):
        mean = Fraction(sum(column), count)
        variance = sum((Fraction(value) - mean) ** 2 for value in column) / count
        std = Fraction(math.sqrt(variance)).limit_denominator(max_denominator)
        means.append(mean.limit_denominator(max_denominator))
        stds.append(std if std > 0 else Fraction(1))
    LOGGER.info("Derived batchnorm statistics for layer 1 from %s samples", count)
    return net.with_layer(1, replace(spec, mean=tuple(means), std=tuple(stds)))
