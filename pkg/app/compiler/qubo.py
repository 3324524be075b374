"""Integer-scaled QUBO instances and their file format.

File format (bit-exact)::

    qubo/1
    vars <n>
    scale <num>/<den>
    offset <int>
    <i> <j> <int-coeff>        # i <= j, sorted, diagonal entries are i == j

The rational objective of an assignment ``x`` is
``(energy(x) + offset) * scale`` with ``energy(x) = sum Q_ij x_i x_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from app.errors import FormatError, SolverError
from app.poly.polynomial import INT64_SAFE, PseudoBooleanPoly, lcm_of_denominators
from app.poly.textio import format_rational, parse_rational

PathLike = Union[str, Path]

HEADER = "qubo/1"


@dataclass
class QuboInstance:
    """Upper-triangular integer coefficients plus constant offset and global scale."""

    num_vars: int
    coefficients: Dict[Tuple[int, int], int]
    constant_offset: int = 0
    global_scale: Fraction = Fraction(1)
    num_original: Optional[int] = field(default=None, compare=False)
    _arrays: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.global_scale = Fraction(self.global_scale)
        if self.global_scale <= 0:
            raise SolverError("QUBO scale must be positive")
        clean: Dict[Tuple[int, int], int] = {}
        for (i, j), value in self.coefficients.items():
            i, j = (int(i), int(j)) if i <= j else (int(j), int(i))
            if not 0 <= i <= j < self.num_vars:
                raise SolverError(f"Coefficient ({i}, {j}) outside {self.num_vars} variables")
            total = clean.get((i, j), 0) + int(value)
            if total:
                clean[(i, j)] = total
            else:
                clean.pop((i, j), None)
        self.coefficients = clean
        if self.num_original is None:
            self.num_original = self.num_vars

    @classmethod
    def from_poly(
        cls,
        poly: PseudoBooleanPoly,
        num_vars: Optional[int] = None,
        num_original: Optional[int] = None,
    ) -> "QuboInstance":
        """Scale ``poly`` by the least common denominator of its coefficients."""

        if poly.degree > 2:
            raise SolverError(f"QUBO needs degree <= 2, polynomial has degree {poly.degree}")
        denominator = lcm_of_denominators(poly.terms.values())
        coefficients: Dict[Tuple[int, int], int] = {}
        for key, value in poly.terms.items():
            if not key:
                continue
            pair = (key[0], key[0]) if len(key) == 1 else (key[0], key[1])
            coefficients[pair] = int(value * denominator)
        size = max(poly.max_bit + 1, num_vars or 0)
        return cls(
            num_vars=size,
            coefficients=coefficients,
            constant_offset=int(poly.constant_term * denominator),
            global_scale=Fraction(1, denominator),
            num_original=num_original,
        )

    @property
    def num_auxiliary(self) -> int:
        return self.num_vars - (self.num_original or self.num_vars)

    def to_poly(self) -> PseudoBooleanPoly:
        terms = {
            (i,) if i == j else (i, j): Fraction(value) * self.global_scale
            for (i, j), value in self.coefficients.items()
        }
        terms[()] = Fraction(self.constant_offset) * self.global_scale
        return PseudoBooleanPoly(terms)

    def energy(self, assignment: Sequence[int]) -> int:
        if len(assignment) < self.num_vars:
            raise SolverError(f"Assignment has {len(assignment)} bits, QUBO has {self.num_vars}")
        total = 0
        for (i, j), value in self.coefficients.items():
            if assignment[i] and assignment[j]:
                total += value
        return total

    def rescale(self, energy: int) -> Fraction:
        return (Fraction(energy) + self.constant_offset) * self.global_scale

    def magnitude(self) -> int:
        return sum(abs(value) for value in self.coefficients.values())

    def check_int64(self) -> None:
        if self.magnitude() + abs(self.constant_offset) >= INT64_SAFE:
            raise SolverError("QUBO coefficients overflow 64-bit integer energy arithmetic")

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(diag, rows, cols, values)`` with off-diagonal entries listed once."""

        if self._arrays is None:
            diag = np.zeros(self.num_vars, dtype=np.int64)
            rows, cols, values = [], [], []
            for (i, j), value in sorted(self.coefficients.items()):
                if i == j:
                    diag[i] = value
                else:
                    rows.append(i)
                    cols.append(j)
                    values.append(value)
            self._arrays = (
                diag,
                np.asarray(rows, dtype=np.int64),
                np.asarray(cols, dtype=np.int64),
                np.asarray(values, dtype=np.int64),
            )
        return self._arrays

    def upper_matrix(self) -> np.ndarray:
        matrix = np.zeros((self.num_vars, self.num_vars), dtype=np.int64)
        for (i, j), value in self.coefficients.items():
            matrix[i, j] = value
        return matrix

    def symmetric_matrix(self) -> np.ndarray:
        """Coupling matrix ``J`` with ``J[i, j] = J[j, i] = Q_ij`` and zero diagonal."""

        diag, rows, cols, values = self.arrays()
        matrix = np.zeros((self.num_vars, self.num_vars), dtype=np.int64)
        matrix[rows, cols] = values
        matrix[cols, rows] = values
        return matrix

    def energies(self, assignments: np.ndarray) -> np.ndarray:
        """Energies of every row of a 0/1 matrix (int64)."""

        matrix = np.asarray(assignments, dtype=np.int64)
        diag, rows, cols, values = self.arrays()
        total = matrix @ diag
        if len(values):
            total = total + (matrix[:, rows] * matrix[:, cols]) @ values
        return total

    def restricted(self, variables: Sequence[int]) -> "QuboInstance":
        """Sub-instance on ``variables`` (renumbered in the given order)."""

        position = {var: idx for idx, var in enumerate(variables)}
        coefficients = {
            (position[i], position[j]): value
            for (i, j), value in self.coefficients.items()
            if i in position and j in position
        }
        return QuboInstance(len(variables), coefficients, 0, self.global_scale)


def dumps_qubo(qubo: QuboInstance) -> str:
    lines = [
        HEADER,
        f"vars {qubo.num_vars}",
        f"scale {format_rational(qubo.global_scale)}",
        f"offset {qubo.constant_offset}",
    ]
    lines.extend(f"{i} {j} {value}" for (i, j), value in sorted(qubo.coefficients.items()))
    return "\n".join(lines) + "\n"


def loads_qubo(lines: Iterable[str], source: Optional[PathLike] = None) -> QuboInstance:
    header: Dict[str, str] = {}
    coefficients: Dict[Tuple[int, int], int] = {}
    expected = ["qubo", "vars", "scale", "offset"]
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        tokens = text.split()
        if expected:
            name = expected.pop(0)
            if name == "qubo":
                if text != HEADER:
                    raise FormatError(f"Expected header {HEADER!r}", path=source, line=lineno)
            elif len(tokens) != 2 or tokens[0] != name:
                raise FormatError(f"Expected '{name} <value>'", path=source, line=lineno)
            else:
                header[name] = tokens[1]
            continue
        if len(tokens) != 3:
            raise FormatError(f"Expected 'i j coeff', got {text!r}", path=source, line=lineno)
        try:
            i, j, value = (int(token) for token in tokens)
        except ValueError as exc:
            raise FormatError(str(exc), path=source, line=lineno) from exc
        if i > j:
            raise FormatError(f"Row {i} > column {j}; only upper-triangular entries are allowed", path=source, line=lineno)
        if (i, j) in coefficients:
            raise FormatError(f"Duplicate entry ({i}, {j})", path=source, line=lineno)
        coefficients[(i, j)] = value
    if expected:
        raise FormatError(f"Truncated QUBO header, missing {expected[0]!r}", path=source)
    try:
        return QuboInstance(
            num_vars=int(header["vars"]),
            coefficients=coefficients,
            constant_offset=int(header["offset"]),
            global_scale=parse_rational(header["scale"]),
        )
    except (ValueError, SolverError) as exc:
        raise FormatError(str(exc), path=source) from exc


def write_qubo(qubo: QuboInstance, path: PathLike) -> None:
    Path(path).write_text(dumps_qubo(qubo), encoding="utf-8")


def read_qubo(path: PathLike) -> QuboInstance:
    path = Path(path)
    if not path.exists():
        raise FormatError("QUBO file not found", path=path)
    with path.open("r", encoding="utf-8") as handle:
        return loads_qubo(handle, source=path)
