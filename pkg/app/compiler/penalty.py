"""Penalty-function elimination of equality constraints."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Union

from app.errors import ConfigError
from app.poly.polynomial import Monomial, PseudoBooleanPoly
from app.poly.textio import parse_rational
from app.topology.constraints import ConstraintSet

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class LambdaPolicy:
    """How each Rosenberg gadget is weighted: ``auto`` bound or a ``fixed`` value."""

    mode: str = "auto"
    value: Optional[Fraction] = None

    def __post_init__(self) -> None:
        if self.mode not in ("auto", "fixed"):
            raise ConfigError(f"Unknown lambda policy {self.mode!r}")
        if self.mode == "fixed":
            if self.value is None or Fraction(self.value) <= 0:
                raise ConfigError("A fixed lambda must be a positive rational")
            object.__setattr__(self, "value", Fraction(self.value))

    @classmethod
    def parse(cls, text: str) -> "LambdaPolicy":
        """``auto`` or ``fixed:<rational>``."""

        text = text.strip().lower()
        if text == "auto":
            return cls()
        mode, sep, value = text.partition(":")
        if mode != "fixed" or not sep:
            raise ConfigError(f"Expected 'auto' or 'fixed:<value>', got {text!r}")
        try:
            return cls("fixed", parse_rational(value))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def __str__(self) -> str:
        if self.mode == "auto":
            return "auto"
        return f"fixed:{self.value.numerator}/{self.value.denominator}"


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty weight ``rho`` (derived when ``None``) and the lambda policy."""

    rho: Optional[Fraction] = None
    lambda_policy: LambdaPolicy = LambdaPolicy()

    def __post_init__(self) -> None:
        if self.rho is not None:
            rho = Fraction(self.rho)
            if rho <= 0:
                raise ConfigError(f"rho must be positive, got {rho}")
            object.__setattr__(self, "rho", rho)


def derive_rho(constraints: ConstraintSet, dataset_size: int, outputs: int) -> Fraction:
    """``4 m N / q**2 + 1`` with ``q`` the smallest residual quantum.

    Any violated constraint contributes at least ``rho * q**2``, which then
    exceeds the largest objective value a feasible point needs.
    """

    quantum = constraints.min_quantum()
    return Fraction(4 * outputs * dataset_size) / (quantum * quantum) + 1


def _accumulate(terms: Dict[Monomial, Fraction], poly: PseudoBooleanPoly, factor: Fraction) -> None:
    for key, value in poly.terms.items():
        terms[key] = terms.get(key, Fraction(0)) + value * factor


def penalize(
    objective: PseudoBooleanPoly,
    constraints: ConstraintSet,
    rho: Union[int, Fraction],
) -> PseudoBooleanPoly:
    """``objective + rho * sum_j phi_j**2`` with each square expanded multilinearly."""

    rho = Fraction(rho)
    if rho <= 0:
        raise ConfigError(f"rho must be positive, got {rho}")
    terms: Dict[Monomial, Fraction] = dict(objective.terms)
    for phi in constraints.constraints:
        _accumulate(terms, phi * phi, rho)
    result = PseudoBooleanPoly({key: value for key, value in terms.items() if value != 0})
    LOGGER.info(
        "Penalized objective: %s terms, degree %s, rho=%s over %s constraints",
        len(result),
        result.degree,
        rho,
        len(constraints),
    )
    return result
