"""Report models printed by the CLI."""

from __future__ import annotations

from typing import Dict, List

from pydantic import BaseModel


class SpinBudgetRow(BaseModel):
    hidden: int
    layers: int
    samples: int
    counts: Dict[str, int]
    total: int
    closed_form: int
    complexity: float
    ratio: float


class SpinBudgetReport(BaseModel):
    rows: List[SpinBudgetRow]

    @property
    def ratio_bounds(self) -> tuple:
        ratios = [row.ratio for row in self.rows]
        return min(ratios), max(ratios)

    def render(self) -> str:
        lines = []
        for row in self.rows:
            counts = " ".join(f"{key}={value}" for key, value in row.counts.items())
            lines.append(
                f"H={row.hidden} L={row.layers} N={row.samples} total={row.total} "
                f"closed_form={row.closed_form} ratio={row.ratio:.4f} {counts}"
            )
        return "\n".join(lines)
