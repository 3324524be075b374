"""Variable keys and offset-binary encodings."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Tuple

from app.errors import EncodingError, MissingBitError
from app.poly.polynomial import PseudoBooleanPoly


class VariableKind(str, Enum):
    WEIGHT = "weight"
    BIAS = "bias"
    SLOPE = "slope"
    PREACT = "preact"
    ABSVAL = "absval"
    SLACK = "slack"
    POSTACT = "postact"
    PREDICTION = "prediction"
    REDUCTION_AUX = "reduction_aux"


PER_SAMPLE_KINDS = frozenset(
    {
        VariableKind.PREACT,
        VariableKind.ABSVAL,
        VariableKind.SLACK,
        VariableKind.POSTACT,
        VariableKind.PREDICTION,
    }
)
PARAMETER_KINDS = frozenset({VariableKind.WEIGHT, VariableKind.BIAS, VariableKind.SLOPE})


@dataclass(frozen=True)
class VariableKey:
    """Identity of one decision variable: kind, layer, sample and element index."""

    kind: VariableKind
    layer: int
    sample: Optional[int] = None
    element: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", VariableKind(self.kind))
        object.__setattr__(self, "element", tuple(int(value) for value in self.element))
        if self.kind in PER_SAMPLE_KINDS and self.sample is None:
            raise EncodingError(f"{self.kind.value} variables need a sample index")
        if self.kind not in PER_SAMPLE_KINDS and self.sample is not None:
            raise EncodingError(f"{self.kind.value} variables are shared across samples")

    def label(self) -> str:
        sample = "" if self.sample is None else f"[i={self.sample}]"
        element = ",".join(str(value) for value in self.element)
        return f"{self.kind.value}{self.layer}{sample}({element})"


@dataclass(frozen=True)
class AffineEncoding:
    """``value = scale * (sum_j 2**j * bit_j + offset)``."""

    bits: Tuple[int, ...]
    offset: Fraction
    scale: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", tuple(int(bit) for bit in self.bits))
        object.__setattr__(self, "offset", Fraction(self.offset))
        object.__setattr__(self, "scale", Fraction(self.scale))
        if not self.bits:
            raise EncodingError("An encoding needs at least one bit")
        if self.scale <= 0:
            raise EncodingError("Encoding scale must be positive")

    @classmethod
    def offset_binary(cls, first_bit: int, num_bits: int, offset: Fraction, scale: Fraction) -> "AffineEncoding":
        return cls(tuple(range(first_bit, first_bit + num_bits)), Fraction(offset), Fraction(scale))

    @classmethod
    def signed_unit(cls, first_bit: int) -> "AffineEncoding":
        """One bit mapped to -1 / +1, i.e. ``2*bit - 1``."""

        return cls((first_bit,), Fraction(-1, 2), Fraction(2))

    @property
    def num_bits(self) -> int:
        return len(self.bits)

    @property
    def first_bit(self) -> int:
        return self.bits[0]

    @property
    def min_value(self) -> Fraction:
        return self.scale * self.offset

    @property
    def max_value(self) -> Fraction:
        return self.scale * (self.offset + 2 ** self.num_bits - 1)

    def values(self) -> Iterator[Fraction]:
        for raw in range(2 ** self.num_bits):
            yield self.scale * (raw + self.offset)

    def contains(self, value: Fraction) -> bool:
        raw = Fraction(value) / self.scale - self.offset
        return raw.denominator == 1 and 0 <= raw < 2 ** self.num_bits

    def encode(self, value: Fraction) -> Tuple[int, ...]:
        """Bit values (least significant first) representing ``value``."""

        raw = Fraction(value) / self.scale - self.offset
        if raw.denominator != 1 or not 0 <= raw < 2 ** self.num_bits:
            raise EncodingError(
                f"Value {value} is not representable in [{self.min_value}, {self.max_value}] step {self.scale}"
            )
        integer = int(raw)
        return tuple((integer >> j) & 1 for j in range(self.num_bits))

    def decode(self, assignment: Sequence[int]) -> Fraction:
        if len(assignment) <= self.bits[-1]:
            raise MissingBitError(f"Assignment of length {len(assignment)} does not cover bit {self.bits[-1]}")
        raw = sum(int(assignment[bit]) << j for j, bit in enumerate(self.bits))
        return self.scale * (raw + self.offset)

    def polynomial(self) -> PseudoBooleanPoly:
        terms = {(bit,): self.scale * 2 ** j for j, bit in enumerate(self.bits)}
        terms[()] = self.scale * self.offset
        return PseudoBooleanPoly(terms)

    def relocated(self, first_bit: int) -> "AffineEncoding":
        return AffineEncoding.offset_binary(first_bit, self.num_bits, self.offset, self.scale)


def decode_value(enc: AffineEncoding, assignment: Sequence[int]) -> Fraction:
    return enc.decode(assignment)
