"""Solutions, multi-restart run reports and the report file.

Report format::

    report/1
    solver <exact|sa>
    restarts <R>
    seed <s>
    sweeps <n>
    restart <k> energy <e>          # one line per restart, integer energy
    best_energy <e>
    best_rescaled <num>/<den>
    best_bits <bitstring>
    hits <h>
    p_s <float>
    t_com <seconds>
    tts <seconds|inf>
    histogram <num>/<den> <count>   # rescaled per-restart best energies

Wall-clock measurements stay in memory so the file is reproducible.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from app.compiler.qubo import QuboInstance
from app.errors import FormatError, MetricDomainError
from app.poly.textio import format_rational, parse_rational
from app.solver.metrics import tts

PathLike = Union[str, Path]

HEADER = "report/1"


@dataclass(frozen=True)
class SpinSolution:
    assignment: Tuple[int, ...]
    energy: int
    rescaled_energy: Fraction

    @classmethod
    def from_assignment(cls, qubo: QuboInstance, assignment: Sequence[int]) -> "SpinSolution":
        bits = tuple(int(bit) for bit in assignment)
        energy = qubo.energy(bits)
        return cls(bits, energy, qubo.rescale(energy))

    @property
    def bitstring(self) -> str:
        return "".join(str(bit) for bit in self.assignment)


@dataclass
class RunReport:
    """Per-restart best energies plus the overall best solution."""

    solver: str
    energies: List[int]
    rescaled: List[Fraction]
    best: SpinSolution
    seed: int = 0
    sweeps: int = 0
    t_com: float = 0.7
    wall_times: List[float] = field(default_factory=list, compare=False)
    states: List[Tuple[int, ...]] = field(default_factory=list, compare=False, repr=False)

    @property
    def restarts(self) -> int:
        return len(self.energies)

    @property
    def hits(self) -> int:
        return sum(1 for value in self.rescaled if value <= 0)

    def success_probability(self) -> Fraction:
        return Fraction(self.hits, self.restarts) if self.restarts else Fraction(0)

    def tts(self) -> float:
        try:
            return tts(self.success_probability(), self.t_com)
        except MetricDomainError:
            return math.inf

    def histogram(self) -> Dict[Fraction, int]:
        counts = Counter(self.rescaled)
        return {key: counts[key] for key in sorted(counts)}


def _format_float(value: float) -> str:
    return "inf" if math.isinf(value) else repr(round(value, 6))


def dumps_report(report: RunReport) -> str:
    lines = [
        HEADER,
        f"solver {report.solver}",
        f"restarts {report.restarts}",
        f"seed {report.seed}",
        f"sweeps {report.sweeps}",
    ]
    lines.extend(f"restart {k} energy {energy}" for k, energy in enumerate(report.energies))
    p_s = report.success_probability()
    lines.extend(
        [
            f"best_energy {report.best.energy}",
            f"best_rescaled {format_rational(report.best.rescaled_energy)}",
            f"best_bits {report.best.bitstring}",
            f"hits {report.hits}",
            f"p_s {_format_float(float(p_s))}",
            f"t_com {_format_float(report.t_com)}",
            f"tts {_format_float(report.tts())}",
        ]
    )
    lines.extend(f"histogram {format_rational(value)} {count}" for value, count in report.histogram().items())
    return "\n".join(lines) + "\n"


def loads_report(lines: Iterable[str], qubo: QuboInstance, source: Optional[PathLike] = None) -> RunReport:
    """Parse a report; ``qubo`` supplies the scale needed to rescale restart energies."""

    fields: Dict[str, str] = {}
    energies: List[int] = []
    seen_header = False
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        if not seen_header:
            if text != HEADER:
                raise FormatError(f"Expected header {HEADER!r}", path=source, line=lineno)
            seen_header = True
            continue
        tokens = text.split()
        try:
            if tokens[0] == "restart":
                if len(tokens) != 4 or tokens[2] != "energy" or int(tokens[1]) != len(energies):
                    raise FormatError("Expected 'restart <k> energy <e>' in order", path=source, line=lineno)
                energies.append(int(tokens[3]))
            elif tokens[0] != "histogram":
                fields[tokens[0]] = " ".join(tokens[1:])
        except ValueError as exc:
            raise FormatError(str(exc), path=source, line=lineno) from exc
    for name in ("solver", "seed", "sweeps", "best_bits", "t_com"):
        if name not in fields:
            raise FormatError(f"Report is missing {name!r}", path=source)
    best = SpinSolution.from_assignment(qubo, [int(char) for char in fields["best_bits"]])
    if "best_energy" in fields and int(fields["best_energy"]) != best.energy:
        raise FormatError("best_energy does not match best_bits on this QUBO", path=source)
    if "best_rescaled" in fields and parse_rational(fields["best_rescaled"]) != best.rescaled_energy:
        raise FormatError("best_rescaled does not match best_bits on this QUBO", path=source)
    return RunReport(
        solver=fields["solver"],
        energies=energies,
        rescaled=[qubo.rescale(energy) for energy in energies],
        best=best,
        seed=int(fields["seed"]),
        sweeps=int(fields["sweeps"]),
        t_com=float(fields["t_com"]),
    )


def write_report(report: RunReport, path: PathLike) -> None:
    Path(path).write_text(dumps_report(report), encoding="utf-8")


def read_report(path: PathLike, qubo: QuboInstance) -> RunReport:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        return loads_report(handle, qubo, source=path)
