"""Quantized training sets and their interchange file.

File format (UTF-8)::

    dataset <n> <m> <N> <B>
    # provenance <key>=<value>
    <x_1> ... <x_n> | <y_1> ... <y_m>

Labels are written as exact rationals ``num/den``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

from app.errors import DataError, FormatError
from app.poly.textio import format_rational, parse_rational

PathLike = Union[str, Path]


@dataclass(frozen=True)
class QuantizedDataset:
    """Integer inputs in ``[-2**B, 2**B]`` with rational labels in ``[-1, 1]``."""

    inputs: Tuple[Tuple[int, ...], ...]
    labels: Tuple[Tuple[Fraction, ...], ...]
    input_bits: int
    provenance: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        inputs = tuple(tuple(int(value) for value in row) for row in self.inputs)
        labels = tuple(tuple(Fraction(value) for value in row) for row in self.labels)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)
        if len(inputs) != len(labels):
            raise DataError(f"{len(inputs)} input rows but {len(labels)} label rows")
        if inputs and len({len(row) for row in inputs}) != 1:
            raise DataError("Input rows have different lengths")
        if labels and len({len(row) for row in labels}) != 1:
            raise DataError("Label rows have different lengths")
        bound = 2 ** self.input_bits
        for index, row in enumerate(inputs):
            if any(abs(value) > bound for value in row):
                raise DataError(f"Sample {index} has an input outside [-{bound}, {bound}]")
        for index, row in enumerate(labels):
            if any(abs(value) > 1 for value in row):
                raise DataError(f"Sample {index} has a label outside [-1, 1]")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def size(self) -> int:
        return len(self.inputs)

    @property
    def num_inputs(self) -> int:
        return len(self.inputs[0]) if self.inputs else 0

    @property
    def num_outputs(self) -> int:
        return len(self.labels[0]) if self.labels else 0

    def subset(self, indices: Iterable[int]) -> "QuantizedDataset":
        picked = list(indices)
        return replace(
            self,
            inputs=tuple(self.inputs[i] for i in picked),
            labels=tuple(self.labels[i] for i in picked),
        )

    def with_labels(self, labels: Sequence[Sequence[Fraction]]) -> "QuantizedDataset":
        return replace(self, labels=tuple(tuple(row) for row in labels))

    def with_provenance(self, **entries: object) -> "QuantizedDataset":
        merged = dict(self.provenance)
        merged.update({key: str(value) for key, value in entries.items()})
        return replace(self, provenance=merged)


def dumps_dataset(dataset: QuantizedDataset) -> str:
    lines = [f"dataset {dataset.num_inputs} {dataset.num_outputs} {dataset.size} {dataset.input_bits}"]
    for key in sorted(dataset.provenance):
        lines.append(f"# provenance {key}={dataset.provenance[key]}")
    for row, labels in zip(dataset.inputs, dataset.labels):
        xs = " ".join(str(value) for value in row)
        ys = " ".join(format_rational(value) for value in labels)
        lines.append(f"{xs} | {ys}")
    return "\n".join(lines) + "\n"


def loads_dataset(lines: Iterable[str], source: Optional[PathLike] = None) -> QuantizedDataset:
    header: Optional[Tuple[int, int, int, int]] = None
    provenance: Dict[str, str] = {}
    inputs = []
    labels = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            body = text[1:].strip()
            if body.startswith("provenance "):
                key, _, value = body[len("provenance "):].partition("=")
                provenance[key.strip()] = value.strip()
            continue
        if header is None:
            tokens = text.split()
            if len(tokens) != 5 or tokens[0] != "dataset":
                raise FormatError("Expected header 'dataset n m N B'", path=source, line=lineno)
            try:
                header = tuple(int(token) for token in tokens[1:])  # type: ignore[assignment]
            except ValueError as exc:
                raise FormatError(str(exc), path=source, line=lineno) from exc
            continue
        left, sep, right = text.partition("|")
        if not sep:
            raise FormatError("Sample line needs 'x... | y...'", path=source, line=lineno)
        try:
            xs = tuple(int(token) for token in left.split())
            ys = tuple(parse_rational(token) for token in right.split())
        except ValueError as exc:
            raise FormatError(str(exc), path=source, line=lineno) from exc
        if len(xs) != header[0] or len(ys) != header[1]:
            raise FormatError(
                f"Expected {header[0]} inputs and {header[1]} labels, got {len(xs)} and {len(ys)}",
                path=source,
                line=lineno,
            )
        inputs.append(xs)
        labels.append(ys)
    if header is None:
        raise FormatError("Missing dataset header", path=source)
    if len(inputs) != header[2]:
        raise FormatError(f"Header declares {header[2]} samples, found {len(inputs)}", path=source)
    return QuantizedDataset(tuple(inputs), tuple(labels), header[3], provenance)


def write_dataset(dataset: QuantizedDataset, path: PathLike) -> None:
    Path(path).write_text(dumps_dataset(dataset), encoding="utf-8")


def read_dataset(path: PathLike) -> QuantizedDataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Dataset file not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        return loads_dataset(handle, source=path)
