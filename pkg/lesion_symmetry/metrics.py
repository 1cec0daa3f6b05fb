"""
Confusion matrices and classification metrics.

Rows of a confusion matrix are predicted classes and columns actual classes:
``cells[i][j]`` counts items predicted as class i whose actual class is j.

Metrics are computed on exact rationals (fractions.Fraction); rounding happens only when
a value is rendered, with round-half-up at the requested number of decimal places.
A 0/0 metric is defined as 0 and reported as a warning.
"""

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, localcontext
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import matplotlib.pyplot as plt
import numpy as np

from .base import SymmetryClass
from .exceptions import (
    DuplicateId,
    EmptyMatrix,
    HeaderMismatch,
    LengthMismatch,
    NonFiniteValue,
    RaggedRow,
    UnknownLabel,
)

logger = logging.getLogger(__name__)

Label = Union[str, Enum]


def _label_text(label: Label) -> str:
    return str(label.value) if isinstance(label, Enum) else str(label)


@dataclass(frozen=True)
class ClassSet:
    """Ordered, distinct class names."""

    labels: Tuple[str, ...] = tuple(c.value for c in SymmetryClass)

    def __post_init__(self):
        labels = tuple(_label_text(label) for label in self.labels)
        if not labels:
            raise ValueError("class set must not be empty")
        if len(set(labels)) != len(labels):
            raise ValueError(f"class labels must be distinct: {labels}")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label) -> bool:
        return _label_text(label) in self.labels

    def index(self, label: Label) -> int:
        text = _label_text(label)
        try:
            return self.labels.index(text)
        except ValueError:
            raise UnknownLabel(f"label {text!r} not in classes {list(self.labels)}") from None


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K count table, rows = predicted, columns = actual."""

    classes: ClassSet
    cells: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        k = len(self.classes)
        cells = tuple(tuple(int(v) for v in row) for row in self.cells)
        if len(cells) != k or any(len(row) != k for row in cells):
            raise ValueError(f"confusion matrix must be {k}x{k}")
        if any(v < 0 for row in cells for v in row):
            raise ValueError("confusion matrix cells must be non-negative")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_rows(
        cls, rows: Sequence[Sequence[int]], classes: Optional[ClassSet] = None
    ) -> "ConfusionMatrix":
        return cls(classes or ClassSet(), tuple(tuple(row) for row in rows))

    @property
    def n(self) -> int:
        return sum(sum(row) for row in self.cells)

    @property
    def trace(self) -> int:
        return sum(self.cells[i][i] for i in range(len(self.cells)))

    @property
    def row_sums(self) -> Tuple[int, ...]:
        """Predicted totals per class."""
        return tuple(sum(row) for row in self.cells)

    @property
    def col_sums(self) -> Tuple[int, ...]:
        """Actual totals (support) per class."""
        return tuple(sum(col) for col in zip(*self.cells))

    def as_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=np.int64)

    def permuted(self, order: Sequence[int]) -> "ConfusionMatrix":
        """Reorder classes; ``order[i]`` is the old index of the new class i."""
        labels = tuple(self.classes.labels[i] for i in order)
        cells = tuple(tuple(self.cells[i][j] for j in order) for i in order)
        return ConfusionMatrix(ClassSet(labels), cells)

    def to_dict(self) -> Dict[str, Any]:
        return {"classes": list(self.classes.labels), "cells": [list(row) for row in self.cells]}


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: Fraction
    recall: Fraction
    f1: Fraction
    support: int


@dataclass(frozen=True)
class MetricsReport:
    """All metrics of a confusion matrix, kept exact."""

    cm: ConfusionMatrix
    per_class: Dict[str, ClassMetrics]
    macro_f1: Fraction
    weighted_f1: Fraction
    kappa: Fraction
    accuracy: Fraction
    warnings: Tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.cm.n

    @property
    def classes(self) -> ClassSet:
        return self.cm.classes

    def rendered(self, places: int = 2) -> Dict[str, Any]:
        """Decimal renderings (round-half-up) of every metric, as strings."""
        out = {
            name: str(render(getattr(self, name), places))
            for name in ("macro_f1", "weighted_f1", "kappa", "accuracy")
        }
        out["per_class"] = {
            label: {
                "precision": str(render(m.precision, places)),
                "recall": str(render(m.recall, places)),
                "f1": str(render(m.f1, places)),
            }
            for label, m in self.per_class.items()
        }
        return out

    def to_dict(self, places: int = 6) -> Dict[str, Any]:
        def num(value: Fraction) -> float:
            return float(render(value, places))

        return {
            "n": self.n,
            "cm": [list(row) for row in self.cm.cells],
            "classes": list(self.classes.labels),
            "per_class": {
                label: {
                    "precision": num(m.precision),
                    "recall": num(m.recall),
                    "f1": num(m.f1),
                    "support": m.support,
                }
                for label, m in self.per_class.items()
            },
            "macro_f1": num(self.macro_f1),
            "weighted_f1": num(self.weighted_f1),
            "kappa": num(self.kappa),
            "accuracy": num(self.accuracy),
            "warnings": list(self.warnings),
        }

    def to_json(self, indent: int = 2, places: int = 6) -> str:
        return json.dumps(self.to_dict(places), indent=indent)


def render(value: Fraction, places: int) -> Decimal:
    """Round an exact rational half-up (away from zero on ties) to ``places`` decimals."""
    value = Fraction(value)
    with localcontext() as ctx:
        ctx.prec = 60
        exact = Decimal(value.numerator) / Decimal(value.denominator)
        return exact.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def _ratio(num: int, den: int) -> Optional[Fraction]:
    return Fraction(num, den) if den else None


def confusion_matrix(
    pred: Sequence[Label], actual: Sequence[Label], classes: Optional[ClassSet] = None
) -> ConfusionMatrix:
    """
    Count (predicted, actual) pairs.

    Args:
        pred: Predicted labels
        actual: Ground-truth labels, aligned with ``pred``
        classes: Class order (defaults to asymmetric, half_symmetric, symmetric)

    Raises:
        LengthMismatch: Sequences differ in length
        EmptyMatrix: Sequences are empty
        UnknownLabel: A label is not in ``classes``
    """
    classes = classes or ClassSet()
    if len(pred) != len(actual):
        raise LengthMismatch(f"{len(pred)} predictions for {len(actual)} ground-truth labels")
    if not pred:
        raise EmptyMatrix("no prediction to count")
    k = len(classes)
    cells = [[0] * k for _ in range(k)]
    for p, a in zip(pred, actual):
        cells[classes.index(p)][classes.index(a)] += 1
    return ConfusionMatrix(classes, tuple(tuple(row) for row in cells))


def _require_counts(cm: ConfusionMatrix) -> None:
    if cm.n == 0:
        raise EmptyMatrix("confusion matrix holds no observation")


def _per_class(cm: ConfusionMatrix) -> Tuple[Dict[str, ClassMetrics], List[str]]:
    _require_counts(cm)
    rows, cols = cm.row_sums, cm.col_sums
    metrics, warnings = {}, []
    for k, label in enumerate(cm.classes):
        tp = cm.cells[k][k]
        fp, fn = rows[k] - tp, cols[k] - tp
        precision = _ratio(tp, rows[k])
        recall = _ratio(tp, cols[k])
        f1 = _ratio(2 * tp, 2 * tp + fp + fn)
        if precision is None or recall is None or f1 is None:
            warnings.append(f"degenerate_class:{label}")
            logger.warning("class %s has a 0/0 metric; defined as 0", label)
        metrics[label] = ClassMetrics(
            label=label,
            precision=precision or Fraction(0),
            recall=recall or Fraction(0),
            f1=f1 or Fraction(0),
            support=cols[k],
        )
    return metrics, warnings


def per_class_prf(cm: ConfusionMatrix) -> Dict[str, ClassMetrics]:
    """
    Precision, recall and F1 of every class.

    precision_k = tp / row_sum_k, recall_k = tp / col_sum_k,
    f1_k = 2 tp / (2 tp + fp + fn); any 0/0 is 0 with a ``degenerate_class`` warning.

    Raises:
        EmptyMatrix: n == 0
    """
    return _per_class(cm)[0]


def macro_f1(cm: ConfusionMatrix) -> Fraction:
    """Unweighted mean of the per-class F1."""
    metrics = per_class_prf(cm)
    return sum((m.f1 for m in metrics.values()), Fraction(0)) / len(metrics)


def weighted_f1(cm: ConfusionMatrix) -> Fraction:
    """Per-class F1 weighted by actual-class support."""
    metrics = per_class_prf(cm)
    return sum((m.support * m.f1 for m in metrics.values()), Fraction(0)) / cm.n


def _kappa(cm: ConfusionMatrix) -> Tuple[Fraction, List[str]]:
    _require_counts(cm)
    n = cm.n
    observed = Fraction(cm.trace, n)
    chance = Fraction(sum(r * c for r, c in zip(cm.row_sums, cm.col_sums)), n * n)
    if chance == 1:
        logger.warning("chance agreement is 1; kappa is degenerate")
        return (Fraction(1) if observed == 1 else Fraction(0)), ["degenerate_chance"]
    return (observed - chance) / (1 - chance), []


def kappa(cm: ConfusionMatrix) -> Fraction:
    """
    Cohen's kappa (P_o - P_e) / (1 - P_e).

    P_o = trace / n and P_e = sum_k row_k * col_k / n^2. When P_e == 1 the value is 1
    for perfect agreement and 0 otherwise, with a ``degenerate_chance`` warning.
    """
    return _kappa(cm)[0]


def accuracy(cm: ConfusionMatrix) -> Fraction:
    """Fraction of items on the diagonal."""
    _require_counts(cm)
    return Fraction(cm.trace, cm.n)


def full_report(cm: ConfusionMatrix) -> MetricsReport:
    """Compute every metric of ``cm`` and collect the warnings."""
    metrics, warnings = _per_class(cm)
    kappa_value, kappa_warnings = _kappa(cm)
    return MetricsReport(
        cm=cm,
        per_class=metrics,
        macro_f1=macro_f1(cm),
        weighted_f1=weighted_f1(cm),
        kappa=kappa_value,
        accuracy=accuracy(cm),
        warnings=tuple(warnings + kappa_warnings),
    )


def _text(content: Union[str, bytes]) -> str:
    return content.decode("utf-8-sig") if isinstance(content, bytes) else content


def load_confusion_matrix(
    content: Union[str, bytes], classes: Optional[ClassSet] = None
) -> ConfusionMatrix:
    """
    Parse K rows of K comma-separated integers (row = predicted).

    Blank lines are ignored. Without ``classes`` a 3x3 matrix gets the default symmetry
    classes and other sizes get ``class_0 ... class_{K-1}``.
    """
    rows = [row for row in csv.reader(io.StringIO(_text(content))) if any(c.strip() for c in row)]
    if not rows:
        raise EmptyMatrix("confusion matrix file is empty")
    k = len(rows)
    cells = []
    for number, row in enumerate(rows, start=1):
        if len(row) != k:
            raise RaggedRow(f"row {number} has {len(row)} cells, expected {k}")
        try:
            values = [int(cell.strip()) for cell in row]
        except ValueError:
            raise NonFiniteValue(f"row {number} holds a non-integer cell: {row}") from None
        if any(v < 0 for v in values):
            raise NonFiniteValue(f"row {number} holds a negative count: {row}")
        cells.append(values)
    if classes is None:
        classes = ClassSet() if k == 3 else ClassSet(tuple(f"class_{i}" for i in range(k)))
    elif len(classes) != k:
        raise LengthMismatch(f"{len(classes)} class names for a {k}x{k} matrix")
    return ConfusionMatrix.from_rows(cells, classes)


def normalize_label(text: str) -> str:
    """Map symmetry labels to their canonical spelling; other labels are only stripped."""
    try:
        return SymmetryClass.parse(text).value
    except ValueError:
        return text.strip()


def read_label_column(content: Union[str, bytes], source: str = "labels") -> Dict[str, str]:
    """
    Read ``image_id -> label`` from a CSV with at least ``image_id`` and ``label`` columns.

    Raises:
        HeaderMismatch: A required column is missing
        DuplicateId: An id appears twice
    """
    reader = csv.DictReader(io.StringIO(_text(content)))
    fields = reader.fieldnames or []
    if "image_id" not in fields or "label" not in fields:
        raise HeaderMismatch(f"{source}: expected image_id and label columns, got {fields}")
    table = {}
    for row in reader:
        image_id = (row["image_id"] or "").strip()
        if image_id in table:
            raise DuplicateId(f"{source}: image id {image_id!r} appears twice")
        table[image_id] = normalize_label(row["label"] or "")
    return table


def load_label_pairs(
    pred_content: Union[str, bytes], truth_content: Union[str, bytes]
) -> Tuple[List[str], List[str], ClassSet]:
    """
    Join a prediction CSV and a ground-truth CSV on the prediction ids.

    The ground truth may cover more ids than the predictions, e.g. when only the test
    subset of a split was predicted; the extra truth rows are ignored.

    Returns:
        (predicted labels, actual labels, class set), ordered by image id. The class set
        is the default symmetry set when every label is a symmetry label, otherwise the
        sorted set of labels seen.

    Raises:
        LengthMismatch: A prediction has no ground truth
        UnknownLabel: Symmetry labels are mixed with a label that is not one
    """
    pred = read_label_column(pred_content, "predictions")
    truth = read_label_column(truth_content, "ground truth")
    extra = sorted(set(pred) - set(truth))
    if extra:
        raise LengthMismatch(f"{len(extra)} predictions lack ground truth, first {extra[0]!r}")
    ids = sorted(pred)
    if len(truth) > len(ids):
        logger.debug("%d ground-truth ids have no prediction", len(truth) - len(ids))
    labels = {pred[i] for i in ids} | {truth[i] for i in ids}
    symmetry = {c.value for c in SymmetryClass}
    unknown = sorted(labels - symmetry)
    if unknown and labels & symmetry:
        raise UnknownLabel(f"{unknown[0]!r} is not a symmetry label")
    classes = ClassSet() if not unknown else ClassSet(tuple(sorted(labels)))
    return [pred[i] for i in ids], [truth[i] for i in ids], classes


def save_confusion_matrix_plot(
    cm: ConfusionMatrix,
    filepath: str,
    title: Optional[str] = None,
    figsize: tuple = (6, 5),
    dpi: int = 150,
) -> None:
    """
    Save a heatmap of the matrix; each cell shows its count and its share of n.

    Args:
        cm: Confusion matrix (rows = predicted)
        filepath: Output image path
        title: Plot title
        figsize: Figure size (width, height)
        dpi: Resolution in dots per inch
    """
    _require_counts(cm)
    data = cm.as_array()
    n = cm.n

    fig, ax = plt.subplots(figsize=figsize)
    ax.imshow(data, cmap="Blues")
    labels = list(cm.classes.labels)
    ax.set_xticks(range(len(labels)))
    ax.set_yticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_yticklabels(labels)
    ax.set_xlabel("Actual", fontsize=12)
    ax.set_ylabel("Predicted", fontsize=12)
    threshold = data.max() / 2.0
    for i in range(data.shape[0]):
        for j in range(data.shape[1]):
            ax.text(
                j,
                i,
                f"{data[i, j]}\n{100.0 * data[i, j] / n:.2f}%",
                ha="center",
                va="center",
                color="white" if data[i, j] > threshold else "black",
                fontsize=9,
            )
    ax.set_title(title or f"Confusion matrix (n={n})", fontsize=13, fontweight="bold")
    fig.tight_layout()
    fig.savefig(filepath, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
