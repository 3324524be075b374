"""Plain-text polynomial format used for fixtures and debugging.

One term per line: ``<num>/<den> b0 b1 ...`` where the bit ids form the
monomial (none for the constant term).  Blank lines and anything after ``#``
are ignored.  The writer emits terms in canonical order so output is
byte-stable.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, TextIO, Union

from app.errors import FormatError
from app.poly.polynomial import Monomial, PseudoBooleanPoly, make_monomial

PathLike = Union[str, Path]


def format_rational(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def parse_rational(token: str) -> Fraction:
    """Parse ``a/b`` or ``a`` into an exact rational."""

    num, sep, den = token.partition("/")
    try:
        if sep:
            return Fraction(int(num), int(den))
        return Fraction(int(num))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"Not a rational: {token!r}") from exc


def dumps_poly(poly: PseudoBooleanPoly) -> str:
    lines = []
    for key, value in poly.sorted_terms():
        lines.append(" ".join([format_rational(value), *(str(bit) for bit in key)]))
    return "\n".join(lines) + ("\n" if lines else "")


def loads_poly(lines: Iterable[str], source: PathLike | None = None) -> PseudoBooleanPoly:
    terms: Dict[Monomial, Fraction] = {}
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        tokens = text.split()
        try:
            coeff = parse_rational(tokens[0])
            key = make_monomial(int(token) for token in tokens[1:])
        except ValueError as exc:
            raise FormatError(str(exc), path=source, line=lineno) from exc
        except Exception as exc:  # negative bit ids surface as EncodingError
            raise FormatError(f"Invalid term {text!r}: {exc}", path=source, line=lineno) from exc
        terms[key] = terms.get(key, Fraction(0)) + coeff
    return PseudoBooleanPoly(terms)


def write_poly(poly: PseudoBooleanPoly, target: Union[PathLike, TextIO]) -> None:
    text = dumps_poly(poly)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


def read_poly(source: Union[PathLike, TextIO]) -> PseudoBooleanPoly:
    if isinstance(source, (str, Path)):
        path = Path(source)
        with path.open("r", encoding="utf-8") as handle:
            return loads_poly(handle, source=path)
    return loads_poly(source)
