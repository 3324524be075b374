"""Exact pseudo-Boolean polynomial algebra."""

from app.poly.polynomial import (
    CONSTANT,
    Monomial,
    PseudoBooleanPoly,
    add,
    degree,
    evaluate,
    lcm_of_denominators,
    make_monomial,
    mul,
    rational_gcd,
    residual_quantum,
    substitute_factor,
)
from app.poly.textio import format_rational, parse_rational, read_poly, write_poly

__all__ = [
    "CONSTANT",
    "Monomial",
    "PseudoBooleanPoly",
    "add",
    "degree",
    "evaluate",
    "format_rational",
    "lcm_of_denominators",
    "make_monomial",
    "mul",
    "parse_rational",
    "rational_gcd",
    "read_poly",
    "residual_quantum",
    "substitute_factor",
    "write_poly",
]
