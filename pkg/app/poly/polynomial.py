"""Exact multilinear pseudo-Boolean polynomials.

A polynomial is a map from canonical monomials (strictly increasing tuples of
bit ids, the empty tuple being the constant term) to non-zero rational
coefficients.  Products are reduced with ``x * x = x`` so every stored
monomial is multilinear, which makes the term map a canonical form for
functions on ``{0, 1}^n``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from app.errors import EncodingError, MissingBitError

INT64_SAFE = 2 ** 62

Monomial = Tuple[int, ...]
Rational = Union[int, Fraction]

CONSTANT: Monomial = ()


def make_monomial(bits: Iterable[int]) -> Monomial:
    """Return the canonical (sorted, repetition-free) monomial for ``bits``."""

    unique = sorted(set(int(bit) for bit in bits))
    if unique and unique[0] < 0:
        raise EncodingError(f"Bit ids must be non-negative, got {unique[0]}")
    return tuple(unique)


def _merge(left: Monomial, right: Monomial) -> Monomial:
    if not left:
        return right
    if not right or left == right:
        return left
    return tuple(sorted(set(left).union(right)))


def _as_rational(value: object) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    raise TypeError(f"Coefficients must be int or Fraction, got {type(value).__name__}")


def rational_gcd(values: Iterable[Rational]) -> Fraction:
    """Greatest rational ``g`` such that every value is an integer multiple of ``g``."""

    fractions = [_as_rational(value) for value in values if value != 0]
    if not fractions:
        return Fraction(0)
    denominator = 1
    for value in fractions:
        denominator = denominator * value.denominator // math.gcd(denominator, value.denominator)
    numerator = 0
    for value in fractions:
        numerator = math.gcd(numerator, abs(value.numerator * (denominator // value.denominator)))
    return Fraction(numerator, denominator)


def lcm_of_denominators(values: Iterable[Rational]) -> int:
    result = 1
    for value in values:
        den = _as_rational(value).denominator
        result = result * den // math.gcd(result, den)
    return result


class PseudoBooleanPoly:
    """Immutable multilinear polynomial with exact rational coefficients."""

    __slots__ = ("_terms", "_degree", "_hash")

    def __init__(self, terms: Optional[Mapping[Iterable[int], Rational]] = None) -> None:
        merged: Dict[Monomial, Fraction] = {}
        for bits, coeff in (terms or {}).items():
            key = make_monomial(bits)
            merged[key] = merged.get(key, Fraction(0)) + _as_rational(coeff)
        self._set_terms({key: value for key, value in merged.items() if value != 0})

    def _set_terms(self, terms: Dict[Monomial, Fraction]) -> None:
        self._terms = terms
        self._degree = max((len(key) for key in terms), default=0)
        self._hash: Optional[int] = None

    @classmethod
    def _from_clean(cls, terms: Dict[Monomial, Fraction]) -> "PseudoBooleanPoly":
        poly = cls.__new__(cls)
        poly._set_terms(terms)
        return poly

    @classmethod
    def zero(cls) -> "PseudoBooleanPoly":
        return cls._from_clean({})

    @classmethod
    def constant(cls, value: Rational) -> "PseudoBooleanPoly":
        value = _as_rational(value)
        return cls._from_clean({CONSTANT: value} if value != 0 else {})

    @classmethod
    def variable(cls, bit: int, coeff: Rational = 1) -> "PseudoBooleanPoly":
        return cls({(bit,): coeff})

    # -- inspection -----------------------------------------------------

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return MappingProxyType(self._terms)

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def constant_term(self) -> Fraction:
        return self._terms.get(CONSTANT, Fraction(0))

    def coefficient(self, bits: Iterable[int]) -> Fraction:
        return self._terms.get(make_monomial(bits), Fraction(0))

    def bits(self) -> Tuple[int, ...]:
        used = set()
        for key in self._terms:
            used.update(key)
        return tuple(sorted(used))

    @property
    def max_bit(self) -> int:
        return max((key[-1] for key in self._terms if key), default=-1)

    def is_zero(self) -> bool:
        return not self._terms

    def sorted_terms(self) -> Iterator[Tuple[Monomial, Fraction]]:
        """Yield terms in canonical order: by degree, then lexicographically."""

        for key in sorted(self._terms, key=lambda mono: (len(mono), mono)):
            yield key, self._terms[key]

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self._terms)

    # -- algebra --------------------------------------------------------

    @staticmethod
    def _coerce(other: object) -> Optional["PseudoBooleanPoly"]:
        if isinstance(other, PseudoBooleanPoly):
            return other
        if isinstance(other, (int, Fraction, np.integer)):
            return PseudoBooleanPoly.constant(_as_rational(other))
        return None

    def __add__(self, other: object) -> "PseudoBooleanPoly":
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        if len(rhs._terms) > len(self._terms):
            base, extra = dict(rhs._terms), self._terms
        else:
            base, extra = dict(self._terms), rhs._terms
        for key, value in extra.items():
            total = base.get(key, Fraction(0)) + value
            if total == 0:
                base.pop(key, None)
            else:
                base[key] = total
        return PseudoBooleanPoly._from_clean(base)

    __radd__ = __add__

    def __neg__(self) -> "PseudoBooleanPoly":
        return PseudoBooleanPoly._from_clean({key: -value for key, value in self._terms.items()})

    def __sub__(self, other: object) -> "PseudoBooleanPoly":
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return self + (-rhs)

    def __rsub__(self, other: object) -> "PseudoBooleanPoly":
        lhs = self._coerce(other)
        if lhs is None:
            return NotImplemented
        return lhs + (-self)

    def scale(self, factor: Rational) -> "PseudoBooleanPoly":
        factor = _as_rational(factor)
        if factor == 0:
            return PseudoBooleanPoly.zero()
        return PseudoBooleanPoly._from_clean({key: value * factor for key, value in self._terms.items()})

    def __mul__(self, other: object) -> "PseudoBooleanPoly":
        if isinstance(other, (int, Fraction, np.integer)):
            return self.scale(other)
        if not isinstance(other, PseudoBooleanPoly):
            return NotImplemented
        product: Dict[Monomial, Fraction] = {}
        for left, lcoeff in self._terms.items():
            for right, rcoeff in other._terms.items():
                key = _merge(left, right)
                product[key] = product.get(key, Fraction(0)) + lcoeff * rcoeff
        return PseudoBooleanPoly._from_clean({key: value for key, value in product.items() if value != 0})

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "PseudoBooleanPoly":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("Only non-negative integer powers are supported")
        result = PseudoBooleanPoly.constant(1)
        for _ in range(exponent):
            result = result * self
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PseudoBooleanPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- evaluation -----------------------------------------------------

    def evaluate(self, assignment: Sequence[int]) -> Fraction:
        if len(assignment) <= self.max_bit:
            raise MissingBitError(
                f"Assignment covers {len(assignment)} bits but the polynomial uses bit {self.max_bit}"
            )
        total = Fraction(0)
        for key, value in self._terms.items():
            if all(assignment[bit] for bit in key):
                total += value
        return total

    def evaluate_batch(self, assignments: np.ndarray) -> Tuple[np.ndarray, int]:
        """Evaluate every row of a 0/1 matrix exactly.

        Returns integer numerators and their common denominator, so
        ``numerators[k] / denominator`` is the value at row ``k``.  Numerators
        are ``int64`` unless the scaled coefficients could overflow it, in
        which case they are Python ints in an object array.
        """

        matrix = np.asarray(assignments)
        if matrix.ndim != 2:
            raise ValueError("Expected a 2-D assignment matrix")
        if matrix.shape[1] <= self.max_bit:
            raise MissingBitError(
                f"Assignments cover {matrix.shape[1]} bits but the polynomial uses bit {self.max_bit}"
            )
        denominator = lcm_of_denominators(self._terms.values())
        mask = matrix.astype(bool)
        scaled_terms = [(key, int(value * denominator)) for key, value in self._terms.items()]
        dtype = np.int64 if sum(abs(scaled) for _, scaled in scaled_terms) < INT64_SAFE else object
        numerators = np.zeros(matrix.shape[0], dtype=np.int64).astype(dtype)
        for key, scaled in scaled_terms:
            if not key:
                numerators += scaled
                continue
            active = np.all(mask[:, list(key)], axis=1)
            numerators += scaled * active.astype(dtype)
        return numerators, denominator

    # -- order reduction support ----------------------------------------

    def substitute_factor(self, u1: int, u2: int, v: int) -> "PseudoBooleanPoly":
        """Replace the product ``u1*u2`` by the fresh bit ``v`` in every monomial."""

        if u1 == u2:
            raise EncodingError("substitute_factor needs two distinct bits")
        if v in self.bits():
            raise EncodingError(f"Bit {v} already occurs in the polynomial")
        pair = {u1, u2}
        result: Dict[Monomial, Fraction] = {}
        for key, value in self._terms.items():
            if u1 in key and u2 in key:
                key = make_monomial((set(key) - pair) | {v})
            result[key] = result.get(key, Fraction(0)) + value
        return PseudoBooleanPoly._from_clean({key: value for key, value in result.items() if value != 0})

    def __repr__(self) -> str:
        if not self._terms:
            return "PseudoBooleanPoly(0)"
        parts = []
        for key, value in self.sorted_terms():
            monomial = "*".join(f"x{bit}" for bit in key)
            parts.append(f"{value}{'*' + monomial if monomial else ''}")
        return "PseudoBooleanPoly(" + " + ".join(parts) + ")"


def add(p: PseudoBooleanPoly, q: PseudoBooleanPoly) -> PseudoBooleanPoly:
    return p + q


def mul(p: PseudoBooleanPoly, q: PseudoBooleanPoly) -> PseudoBooleanPoly:
    return p * q


def evaluate(p: PseudoBooleanPoly, assignment: Sequence[int]) -> Fraction:
    return p.evaluate(assignment)


def degree(p: PseudoBooleanPoly) -> int:
    return p.degree


def substitute_factor(p: PseudoBooleanPoly, u1: int, u2: int, v: int) -> PseudoBooleanPoly:
    return p.substitute_factor(u1, u2, v)


def residual_quantum(p: PseudoBooleanPoly) -> Fraction:
    """Every value of ``p`` at a 0/1 assignment is an integer multiple of this."""

    return rational_gcd(p.terms.values())
