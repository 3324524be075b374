"""Training objectives expressed over prediction bits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Tuple, Union

from app.data.dataset import QuantizedDataset
from app.encoding.registry import VariableRegistry
from app.encoding.variables import VariableKey, VariableKind
from app.errors import ConfigError, DataError
from app.poly.polynomial import PseudoBooleanPoly
from app.topology.constraints import ConstraintSet, ConstraintTag
from app.topology.network import LossKind, parse_loss

LOGGER = logging.getLogger(__name__)


@dataclass
class LossTerms:
    """Objective polynomial plus any equations the loss introduces."""

    objective: PseudoBooleanPoly
    constraints: ConstraintSet = field(default_factory=ConstraintSet)


@dataclass(frozen=True)
class SnapSummary:
    snapped: int
    max_distance: Fraction
    grid: Fraction


def _round_half_away(value: Fraction) -> int:
    magnitude = int(abs(value) + Fraction(1, 2))
    return magnitude if value >= 0 else -magnitude


def snap_labels(dataset: QuantizedDataset, hidden: int) -> Tuple[QuantizedDataset, SnapSummary]:
    """Move every label to the nearest multiple of ``1/(2H)``."""

    grid = Fraction(1, 2 * hidden)
    snapped = 0
    worst = Fraction(0)
    rows = []
    for row in dataset.labels:
        new_row = []
        for value in row:
            target = _round_half_away(value / grid) * grid
            if target != value:
                snapped += 1
                worst = max(worst, abs(target - value))
            new_row.append(target)
        rows.append(tuple(new_row))
    if snapped:
        LOGGER.warning("Snapped %s labels to the 1/%s grid (max distance %s)", snapped, 2 * hidden, worst)
        dataset = dataset.with_labels(rows)
    return dataset, SnapSummary(snapped=snapped, max_distance=worst, grid=grid)


def build_loss(
    kind: Union[str, LossKind],
    registry: VariableRegistry,
    dataset: QuantizedDataset,
) -> LossTerms:
    """MSE ``1/N sum (y - y_hat)^2`` or hinge ``1/(2N) sum (r + 1 - y y_hat)``."""

    loss = kind if isinstance(kind, LossKind) else parse_loss(kind)
    layer = registry.layers
    count = dataset.size
    if count == 0:
        raise DataError("Cannot build a loss over an empty dataset")
    if registry.dataset_size != count:
        raise ConfigError(f"Registry was built for {registry.dataset_size} samples, dataset has {count}")
    objective = PseudoBooleanPoly.zero()
    constraints = ConstraintSet()
    for i, labels in enumerate(dataset.labels):
        for o, label in enumerate(labels):
            prediction = registry.expr(VariableKey(VariableKind.PREDICTION, layer, i, (o,)))
            if loss == LossKind.MSE:
                error = prediction - label
                objective = objective + error * error * Fraction(1, count)
                continue
            if label not in (1, -1):
                raise DataError(f"Hinge loss needs labels of +1 or -1, sample {i} has {label}")
            margin = 1 - prediction * label
            r = registry.expr(VariableKey(VariableKind.ABSVAL, layer, i, (o,)))
            t = registry.expr(VariableKey(VariableKind.SLACK, layer, i, (o,)))
            constraints.add(ConstraintTag("hinge", layer, i, o), t * margin - r)
            objective = objective + (r + margin) * Fraction(1, 2 * count)
    return LossTerms(objective=objective, constraints=constraints)
