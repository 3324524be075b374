"""Network description files.

A network file is flat ``key=value`` text, one setting per line; ``#``
starts a comment.  Recognised keys:

``layers``, ``hidden``, ``inputs`` (required)
    L (including the output layer), H and n.
``outputs``, ``input_bits``
    m (default 1) and B (default 0).
``activation``, ``loss``
    Hidden activation (``sign``, ``relu``, ``leaky_relu``, ``prelu``,
    ``abs``, ``none``) and loss (``mse``, ``hinge``).
``input_shape``
    ``RxC`` layout of the input vector, needed by conv2d/avgpool.
``binary_weights``
    ``true`` (default) keeps hidden weights at +-1; ``false`` makes them
    ``hidden_weight_bits``-bit signed integers.
``first_bias_offset``, ``leaky_alpha``, ``prelu_bits``
    Offset of the layer-1 bias encoding, Leaky ReLU slope (``a/b``) and
    PReLU slope bit count.
``layer.<k>``
    Kind of hidden layer k: ``dense``, ``conv2d:KhxKw``,
    ``avgpool:WhxWw`` or ``avgpool:WhxWw:ShxSw``, ``batchnorm`` (statistics
    derived from the training inputs, layer 1 only) or
    ``batchnorm:mu=<v,...>;sigma=<v,...>``.
``activation.<k>``
    Activation override for hidden layer k.

Example (the MNIST 6/9 network)::

    layers=2
    hidden=1
    inputs=4
    input_bits=0
    activation=sign
    loss=mse
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

from app.config import settings
from app.errors import ConfigError, FormatError, UnsupportedModuleError
from app.poly.textio import parse_rational
from app.topology.network import (
    OUT_OF_SCOPE_LAYERS,
    LayerSpec,
    LayerType,
    NetworkSpec,
    parse_activation,
    parse_loss,
)

PathLike = Union[str, Path]

_SCALAR_KEYS = {
    "layers",
    "hidden",
    "inputs",
    "outputs",
    "input_bits",
    "activation",
    "loss",
    "input_shape",
    "binary_weights",
    "hidden_weight_bits",
    "first_bias_offset",
    "leaky_alpha",
    "prelu_bits",
}


def _parse_shape(text: str) -> Tuple[int, int]:
    rows, sep, cols = text.lower().partition("x")
    if not sep:
        raise ValueError(f"Expected RxC shape, got {text!r}")
    return int(rows), int(cols)


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"Expected a boolean, got {text!r}")


def parse_layer(text: str) -> LayerSpec:
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    if kind in OUT_OF_SCOPE_LAYERS:
        raise UnsupportedModuleError(f"{kind} layers are out of scope and have no equality-constraint form")
    layer_type = LayerType(kind)
    if layer_type == LayerType.DENSE:
        return LayerSpec()
    if layer_type == LayerType.CONV2D:
        return LayerSpec(kind=layer_type, kernel=_parse_shape(rest))
    if layer_type == LayerType.AVGPOOL:
        window, _, stride = rest.partition(":")
        return LayerSpec(
            kind=layer_type,
            window=_parse_shape(window),
            stride=_parse_shape(stride) if stride else None,
        )
    stats: Dict[str, Tuple] = {}
    for part in filter(None, rest.split(";")):
        name, _, values = part.partition("=")
        stats[name.strip()] = tuple(parse_rational(token.strip()) for token in values.split(","))
    return LayerSpec(kind=layer_type, mean=stats.get("mu", ()), std=stats.get("sigma", ()))


def parse_network(lines: Iterable[str], source: Optional[PathLike] = None) -> NetworkSpec:
    scalars: Dict[str, str] = {}
    layer_specs: Dict[int, LayerSpec] = {}
    overrides: Dict[int, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        key, sep, value = text.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep or not value:
            raise FormatError(f"Expected key=value, got {text!r}", path=source, line=lineno)
        try:
            if key in _SCALAR_KEYS:
                scalars[key] = value
            elif key.startswith("layer."):
                layer_specs[int(key.split(".", 1)[1])] = parse_layer(value)
            elif key.startswith("activation."):
                overrides[int(key.split(".", 1)[1])] = value
            else:
                raise FormatError(f"Unknown key {key!r}", path=source, line=lineno)
        except ConfigError as exc:
            if isinstance(exc, FormatError):
                raise
            raise type(exc)(f"{source or 'network'}:{lineno}: {exc}") from exc
        except ValueError as exc:
            raise FormatError(str(exc), path=source, line=lineno) from exc

    missing = [key for key in ("layers", "hidden", "inputs") if key not in scalars]
    if missing:
        raise FormatError(f"Missing required keys: {', '.join(missing)}", path=source)
    try:
        layers = int(scalars["layers"])
        kinds = []
        for k in range(1, layers):
            spec = layer_specs.pop(k, LayerSpec())
            if k in overrides:
                spec = LayerSpec(
                    kind=spec.kind,
                    kernel=spec.kernel,
                    window=spec.window,
                    stride=spec.stride,
                    mean=spec.mean,
                    std=spec.std,
                    activation=parse_activation(overrides.pop(k)),
                )
            kinds.append(spec)
        if layer_specs or overrides:
            extra = sorted(set(layer_specs) | set(overrides))
            raise ConfigError(f"Layer overrides for non-hidden layers {extra}; hidden layers are 1..{layers - 1}")
        return NetworkSpec(
            layers=layers,
            hidden=int(scalars["hidden"]),
            inputs=int(scalars["inputs"]),
            outputs=int(scalars.get("outputs", 1)),
            input_bits=int(scalars.get("input_bits", 0)),
            hidden_activation=parse_activation(scalars.get("activation", "sign")),
            loss=parse_loss(scalars.get("loss", "mse")),
            layer_kinds=tuple(kinds),
            input_shape=_parse_shape(scalars["input_shape"]) if "input_shape" in scalars else None,
            binary_weights_except_last=_parse_bool(scalars.get("binary_weights", "true")),
            hidden_weight_bits=int(scalars.get("hidden_weight_bits", settings.hidden_weight_bits)),
            first_bias_offset=int(scalars.get("first_bias_offset", 0)),
            leaky_alpha=parse_rational(scalars.get("leaky_alpha", "1/4")),
            prelu_bits=int(scalars.get("prelu_bits", settings.prelu_bits)),
        )
    except ValueError as exc:
        raise FormatError(str(exc), path=source) from exc


def read_network(path: PathLike) -> NetworkSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Network file not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        return parse_network(handle, source=path)


def dumps_network(net: NetworkSpec) -> str:
    """Render ``net`` back into the key=value form ``parse_network`` reads."""

    lines = [
        f"layers={net.layers}",
        f"hidden={net.hidden}",
        f"inputs={net.inputs}",
        f"outputs={net.outputs}",
        f"input_bits={net.input_bits}",
        f"activation={net.hidden_activation.value}",
        f"loss={net.loss.value}",
        f"binary_weights={'true' if net.binary_weights_except_last else 'false'}",
        f"hidden_weight_bits={net.hidden_weight_bits}",
        f"first_bias_offset={net.first_bias_offset}",
        f"leaky_alpha={net.leaky_alpha.numerator}/{net.leaky_alpha.denominator}",
        f"prelu_bits={net.prelu_bits}",
    ]
    if net.input_shape is not None:
        lines.append(f"input_shape={net.input_shape[0]}x{net.input_shape[1]}")
    for k, spec in enumerate(net.layer_kinds, start=1):
        if spec.kind == LayerType.CONV2D:
            lines.append(f"layer.{k}=conv2d:{spec.kernel[0]}x{spec.kernel[1]}")
        elif spec.kind == LayerType.AVGPOOL:
            lines.append(
                f"layer.{k}=avgpool:{spec.window[0]}x{spec.window[1]}:{spec.stride[0]}x{spec.stride[1]}"
            )
        elif spec.kind == LayerType.BATCHNORM:
            mu = ",".join(f"{v.numerator}/{v.denominator}" for v in spec.mean)
            sigma = ",".join(f"{v.numerator}/{v.denominator}" for v in spec.std)
            lines.append(f"layer.{k}=batchnorm" + (f":mu={mu};sigma={sigma}" if mu else ""))
        if spec.activation is not None:
            lines.append(f"activation.{k}={spec.activation.value}")
    return "\n".join(lines) + "\n"
