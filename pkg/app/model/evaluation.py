"""Training/test metrics and their report files."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Tuple, Union

from app.data.dataset import QuantizedDataset
from app.errors import ConfigError
from app.model.forward import forward
from app.model.params import DecodedParameters
from app.poly.textio import format_rational

PathLike = Union[str, Path]

TASKS = ("regression", "binary_classification")
CLASS_NAMES = ("positive", "negative")


@dataclass(frozen=True)
class EvalReport:
    """``mse`` and ``hinge`` are exact; ``confusion[true][predicted]`` with row 0 the positive class."""

    size: int
    mse: Fraction
    hinge: Fraction
    accuracy: Optional[Fraction] = None
    confusion: Optional[Tuple[Tuple[int, int], Tuple[int, int]]] = None
    predictions: Tuple[Tuple[Fraction, ...], ...] = ()


def _class_index(value: Fraction) -> int:
    return 0 if value >= 0 else 1


def evaluate_model(
    params: DecodedParameters,
    dataset: QuantizedDataset,
    task: str = "binary_classification",
) -> EvalReport:
    """MSE ``1/N sum ||y - y_hat||**2``, hinge and, for binary tasks, accuracy and confusion.

    A prediction of exactly zero counts as the positive class.
    """

    if task not in TASKS:
        raise ConfigError(f"Unknown task {task!r}; expected one of {', '.join(TASKS)}")
    if dataset.size == 0:
        raise ConfigError("Cannot evaluate on an empty dataset")
    predictions = tuple(forward(params, x) for x in dataset.inputs)
    squared = Fraction(0)
    hinge = Fraction(0)
    for labels, outputs in zip(dataset.labels, predictions):
        for y, prediction in zip(labels, outputs):
            squared += (y - prediction) ** 2
            hinge += max(Fraction(0), 1 - y * prediction)
    size = dataset.size
    if task == "regression":
        return EvalReport(size, squared / size, hinge / size, predictions=predictions)

    confusion: List[List[int]] = [[0, 0], [0, 0]]
    for labels, outputs in zip(dataset.labels, predictions):
        confusion[_class_index(labels[0])][_class_index(outputs[0])] += 1
    correct = confusion[0][0] + confusion[1][1]
    return EvalReport(
        size=size,
        mse=squared / size,
        hinge=hinge / size,
        accuracy=Fraction(correct, size),
        confusion=(tuple(confusion[0]), tuple(confusion[1])),
        predictions=predictions,
    )


def dumps_eval_report(report: EvalReport, label: str = "train") -> str:
    lines = [
        f"{label}.samples {report.size}",
        f"{label}.mse {format_rational(report.mse)}",
        f"{label}.hinge {format_rational(report.hinge)}",
    ]
    if report.accuracy is not None:
        lines.append(f"{label}.accuracy {float(report.accuracy):.6f}")
        (tp, fn), (fp, tn) = report.confusion
        lines.append(f"{label}.confusion {tp} {fn} {fp} {tn}")
    return "\n".join(lines) + "\n"


def write_eval_report(reports: List[Tuple[str, EvalReport]], path: PathLike) -> None:
    Path(path).write_text("".join(dumps_eval_report(report, label) for label, report in reports), encoding="utf-8")


def write_confusion_csv(report: EvalReport, path: PathLike) -> None:
    if report.confusion is None:
        raise ConfigError("Confusion matrices exist only for binary classification")
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["true\\predicted", *CLASS_NAMES])
        for name, row in zip(CLASS_NAMES, report.confusion):
            writer.writerow([name, *row])
