"""Rosenberg order reduction of pseudo-Boolean polynomials.

Each step picks the bit pair occurring most often inside monomials of
degree above two (ties go to the lexicographically smallest pair), replaces
the pair by a fresh bit ``v`` everywhere it occurs and adds
``lambda * h(u1, u2, v)`` with ``h = 3v + u1 u2 - 2 u1 v - 2 u2 v``.
``h`` is zero exactly when ``v = u1 u2`` and at least one otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

from app.compiler.penalty import LambdaPolicy, PenaltyConfig
from app.compiler.qubo import QuboInstance
from app.errors import EncodingError, FormatError
from app.poly.polynomial import Monomial, PseudoBooleanPoly, make_monomial
from app.poly.textio import format_rational, parse_rational

LOGGER = logging.getLogger(__name__)

Pair = Tuple[int, int]
PathLike = Union[str, Path]


def rosenberg_poly(u1: int, u2: int, v: int) -> PseudoBooleanPoly:
    if len({u1, u2, v}) != 3:
        raise EncodingError(f"Rosenberg gadget needs three distinct bits, got ({u1}, {u2}, {v})")
    return PseudoBooleanPoly({(v,): 3, (u1, u2): 1, (u1, v): -2, (u2, v): -2})


@dataclass(frozen=True)
class ReductionRecord:
    u1: int
    u2: int
    v: int
    lam: Fraction


@dataclass
class ReductionTrace:
    records: List[ReductionRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ReductionRecord]:
        return iter(self.records)

    def replay(self, poly: PseudoBooleanPoly, steps: Optional[int] = None) -> PseudoBooleanPoly:
        """Re-apply the first ``steps`` substitutions and gadgets (all by default)."""

        for record in self.records[: len(self.records) if steps is None else steps]:
            poly = poly.substitute_factor(record.u1, record.u2, record.v)
            poly = poly + rosenberg_poly(record.u1, record.u2, record.v) * record.lam
        return poly

    def complete(self, assignment: Sequence[int]) -> List[int]:
        """Extend an assignment of the original bits with honest auxiliaries ``v = u1 u2``."""

        bits = list(assignment)
        for record in self.records:
            while len(bits) <= record.v:
                bits.append(0)
            bits[record.v] = int(bits[record.u1]) & int(bits[record.u2])
        return bits

    def dishonest(self, assignment: Sequence[int]) -> List[ReductionRecord]:
        return [
            record
            for record in self.records
            if int(assignment[record.v]) != (int(assignment[record.u1]) & int(assignment[record.u2]))
        ]


def super_quadratic_excess(poly: PseudoBooleanPoly) -> int:
    """Sum of ``degree - 2`` over monomials above degree two; zero iff quadratic."""

    return sum(len(key) - 2 for key in poly.terms if len(key) > 2)


class _PairIndex:
    """Pair frequencies over monomials of degree above two, updated incrementally."""

    def __init__(self) -> None:
        self.count: Dict[Pair, int] = {}
        self.members: Dict[Pair, Set[Monomial]] = {}

    def add(self, mono: Monomial) -> None:
        for pair in combinations(mono, 2):
            self.count[pair] = self.count.get(pair, 0) + 1
            self.members.setdefault(pair, set()).add(mono)

    def remove(self, mono: Monomial) -> None:
        for pair in combinations(mono, 2):
            remaining = self.count[pair] - 1
            if remaining:
                self.count[pair] = remaining
                self.members[pair].discard(mono)
            else:
                del self.count[pair]
                del self.members[pair]

    def best(self) -> Optional[Pair]:
        if not self.count:
            return None
        return min(self.count.items(), key=lambda item: (-item[1], item[0]))[0]


def quadratize(
    poly: PseudoBooleanPoly,
    policy: Union[PenaltyConfig, LambdaPolicy, None] = None,
    first_aux: Optional[int] = None,
) -> Tuple[PseudoBooleanPoly, ReductionTrace, int]:
    """Quadratize ``poly``; auxiliaries are numbered from ``first_aux`` upward.

    Returns the quadratic polynomial, the substitution trace and the total
    number of variables.
    """

    if isinstance(policy, PenaltyConfig):
        policy = policy.lambda_policy
    policy = policy or LambdaPolicy()
    terms: Dict[Monomial, Fraction] = dict(poly.terms)
    index = _PairIndex()
    for key in terms:
        if len(key) > 2:
            index.add(key)
    next_v = max(poly.max_bit + 1, first_aux or 0)
    trace = ReductionTrace()

    while True:
        pair = index.best()
        if pair is None:
            break
        u1, u2 = pair
        v = next_v
        next_v += 1
        affected = sorted(index.members[pair])
        exact = terms.get(pair)
        if policy.mode == "fixed":
            lam = policy.value
        else:
            lam = 1 + sum(abs(terms[key]) for key in affected) + (abs(exact) if exact is not None else 0)

        for key in affected:
            coeff = terms.pop(key)
            index.remove(key)
            new_key = make_monomial((set(key) - {u1, u2}) | {v})
            terms[new_key] = coeff
            if len(new_key) > 2:
                index.add(new_key)
        if exact is not None:
            del terms[pair]
            terms[(v,)] = terms.get((v,), Fraction(0)) + exact

        for key, value in (((v,), 3), (pair, 1), ((u1, v), -2), ((u2, v), -2)):
            total = terms.get(key, Fraction(0)) + lam * value
            if total == 0:
                terms.pop(key, None)
            else:
                terms[key] = total
        trace.records.append(ReductionRecord(u1, u2, v, lam))
        LOGGER.debug("Substituted x%s*x%s -> x%s (%s monomials, lambda=%s)", u1, u2, v, len(affected), lam)

    result = PseudoBooleanPoly(terms)
    if trace.records:
        LOGGER.info("Order reduction added %s auxiliary bits", len(trace))
    return result, trace, next_v


def reduce_order(
    poly: PseudoBooleanPoly,
    policy: Union[PenaltyConfig, LambdaPolicy, None] = None,
    first_aux: Optional[int] = None,
) -> Tuple[QuboInstance, ReductionTrace]:
    """Lower ``poly`` to an integer-scaled QUBO plus the trace that produced it."""

    num_original = max(poly.max_bit + 1, first_aux or 0)
    quadratic, trace, num_vars = quadratize(poly, policy, first_aux)
    return QuboInstance.from_poly(quadratic, num_vars=num_vars, num_original=num_original), trace


def dumps_trace(trace: ReductionTrace) -> str:
    lines = [f"{r.u1} {r.u2} {r.v} {format_rational(r.lam)}" for r in trace]
    return "\n".join(lines) + ("\n" if lines else "")


def loads_trace(lines: Iterable[str], source: Optional[PathLike] = None) -> ReductionTrace:
    trace = ReductionTrace()
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        tokens = text.split()
        if len(tokens) != 4:
            raise FormatError(f"Expected 'u1 u2 v lambda', got {text!r}", path=source, line=lineno)
        try:
            trace.records.append(
                ReductionRecord(int(tokens[0]), int(tokens[1]), int(tokens[2]), parse_rational(tokens[3]))
            )
        except ValueError as exc:
            raise FormatError(str(exc), path=source, line=lineno) from exc
    return trace


def write_trace(trace: ReductionTrace, path: PathLike) -> None:
    Path(path).write_text(dumps_trace(trace), encoding="utf-8")


def read_trace(path: PathLike) -> ReductionTrace:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        return loads_trace(handle, source=path)
