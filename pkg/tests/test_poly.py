"""Pseudo-Boolean polynomial algebra and its text format."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from app.errors import EncodingError, FormatError, MissingBitError
from app.poly import (
    PseudoBooleanPoly,
    make_monomial,
    rational_gcd,
    read_poly,
    residual_quantum,
    write_poly,
)
from app.poly.textio import dumps_poly, loads_poly, parse_rational


def _random_poly(rng, num_bits, num_terms, max_degree):
    terms = {}
    for _ in range(num_terms):
        size = int(rng.integers(0, max_degree + 1))
        bits = tuple(int(b) for b in rng.choice(num_bits, size=size, replace=False))
        terms[bits] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 5)))
    return PseudoBooleanPoly(terms)


def _cube(num_bits):
    return [list(bits) for bits in itertools.product((0, 1), repeat=num_bits)]


class TestMonomials:
    def test_canonical_order_and_repetition(self):
        assert make_monomial([3, 1, 3, 2]) == (1, 2, 3)
        assert make_monomial([]) == ()

    def test_negative_bit_rejected(self):
        with pytest.raises(EncodingError):
            make_monomial([0, -1])


class TestAlgebra:
    def test_idempotent_product(self):
        x = PseudoBooleanPoly.variable(0)
        assert x * x == x
        assert (x * 3) * x == x * 3

    def test_square_of_sum(self):
        # (x0 + x1)^2 = x0 + x1 + 2 x0 x1 on booleans
        x0, x1 = PseudoBooleanPoly.variable(0), PseudoBooleanPoly.variable(1)
        square = (x0 + x1) ** 2
        assert square.coefficient([0]) == 1
        assert square.coefficient([1]) == 1
        assert square.coefficient([0, 1]) == 2
        assert square.degree == 2

    def test_zero_coefficients_dropped(self):
        x = PseudoBooleanPoly.variable(0)
        assert (x - x).is_zero()
        assert len(PseudoBooleanPoly({(0,): 1, (0, 0): -1})) == 0

    def test_scalar_mixing(self):
        x = PseudoBooleanPoly.variable(2)
        poly = 1 - x * Fraction(1, 2) + 3
        assert poly.constant_term == 4
        assert poly.coefficient([2]) == Fraction(-1, 2)

    def test_operations_agree_with_pointwise_values(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            p = _random_poly(rng, 5, 6, 3)
            q = _random_poly(rng, 5, 6, 3)
            for bits in _cube(5):
                assert (p + q).evaluate(bits) == p.evaluate(bits) + q.evaluate(bits)
                assert (p * q).evaluate(bits) == p.evaluate(bits) * q.evaluate(bits)
                assert (p - q).evaluate(bits) == p.evaluate(bits) - q.evaluate(bits)

    def test_equality_is_canonical(self):
        a = PseudoBooleanPoly({(1, 0): 2, (): 1})
        b = PseudoBooleanPoly({(0, 1): 1, (1, 0, 1): 1, (): Fraction(2, 2)})
        assert a == b
        assert hash(a) == hash(b)


class TestEvaluation:
    def test_missing_bit(self):
        poly = PseudoBooleanPoly({(0, 4): 1})
        with pytest.raises(MissingBitError):
            poly.evaluate([1, 1, 1])

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(3)
        poly = _random_poly(rng, 4, 8, 4)
        matrix = np.array(_cube(4), dtype=np.int8)
        numerators, denominator = poly.evaluate_batch(matrix)
        expected = [poly.evaluate(row) for row in matrix.tolist()]
        assert [Fraction(int(n), denominator) for n in numerators] == expected

    def test_batch_large_coefficients_stay_exact(self):
        poly = PseudoBooleanPoly({(0,): 2 ** 62, (1,): 2 ** 62, (0, 1): 3})
        numerators, denominator = poly.evaluate_batch(np.array([[1, 1], [1, 0], [0, 0]], dtype=np.int8))
        assert denominator == 1
        assert [int(n) for n in numerators] == [2 ** 63 + 3, 2 ** 62, 0]


class TestSubstitution:
    def test_substitute_factor(self):
        poly = PseudoBooleanPoly({(0, 1, 2): 2, (0, 1): 3, (0, 2): 1})
        replaced = poly.substitute_factor(0, 1, 5)
        assert replaced.coefficient([2, 5]) == 2
        assert replaced.coefficient([5]) == 3
        assert replaced.coefficient([0, 2]) == 1
        assert replaced.coefficient([0, 1, 2]) == 0

    def test_substitute_agrees_when_honest(self):
        rng = np.random.default_rng(11)
        poly = _random_poly(rng, 4, 10, 4)
        replaced = poly.substitute_factor(1, 2, 4)
        for bits in _cube(4):
            extended = bits + [bits[1] & bits[2]]
            assert replaced.evaluate(extended) == poly.evaluate(bits)

    def test_fresh_bit_must_be_unused(self):
        poly = PseudoBooleanPoly({(0, 1, 2): 1})
        with pytest.raises(EncodingError):
            poly.substitute_factor(0, 1, 2)


class TestResidualQuantum:
    def test_gcd_of_rationals(self):
        assert rational_gcd([Fraction(1, 2), Fraction(3, 4)]) == Fraction(1, 4)
        assert rational_gcd([4, 6]) == 2
        assert rational_gcd([]) == 0

    def test_values_are_multiples(self):
        poly = PseudoBooleanPoly({(0,): Fraction(1, 2), (1,): 2, (): Fraction(-3, 2)})
        quantum = residual_quantum(poly)
        assert quantum == Fraction(1, 2)
        for bits in _cube(2):
            assert (poly.evaluate(bits) / quantum).denominator == 1


class TestTextFormat:
    def test_file_roundtrip(self, tmp_path):
        poly = PseudoBooleanPoly({(): Fraction(-1, 3), (2,): 4, (0, 2): Fraction(5, 2)})
        path = tmp_path / "p.poly"
        write_poly(poly, path)
        assert read_poly(path) == poly

    def test_canonical_line_order(self):
        poly = PseudoBooleanPoly({(0, 1): 1, (1,): 2, (): 3})
        assert dumps_poly(poly) == "3/1\n2/1 1\n1/1 0 1\n"

    def test_comments_and_blank_lines(self):
        poly = loads_poly(["# header", "", "1/2 0  # half x0", "1 0"])
        assert poly.coefficient([0]) == Fraction(3, 2)

    def test_bad_line_reports_location(self):
        with pytest.raises(FormatError) as info:
            loads_poly(["1/2 0", "x 1"], source="bad.poly")
        assert info.value.line == 2

    def test_parse_rational(self):
        assert parse_rational("-6/4") == Fraction(-3, 2)
        assert parse_rational("7") == 7
        with pytest.raises(ValueError):
            parse_rational("1/0")
