"""
Linear SVM trained by stochastic gradient descent, combined one-vs-one.

Binary models minimize ``lam/2 * |w|^2 + mean(hinge)`` with the Pegasos step size
``1 / (lam * t)``. A K-class ensemble holds one binary model per unordered class pair,
each trained on that pair's examples only, and predicts by majority vote.

Features are supplied externally as CSV (``id,label,f0,...,f{d-1}``); nothing here
extracts them.
"""

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .base import SymmetryClass
from .exceptions import (
    DimensionMismatch,
    DuplicateId,
    EmptySet,
    HeaderMismatch,
    LesionSymmetryError,
    MissingRecord,
    NonFiniteValue,
    RaggedRow,
    SingleClassData,
    TooFewClasses,
    UnlabeledData,
)
from .metrics import ClassSet, ConfusionMatrix, confusion_matrix, normalize_label

logger = logging.getLogger(__name__)

EPSILON = 1e-12


@dataclass(frozen=True)
class FeatureRecord:
    id: str
    label: Optional[str]
    features: Tuple[float, ...]


def _present_classes(labels: Sequence[Optional[str]]) -> Optional[ClassSet]:
    """Labels that occur, symmetry labels in their canonical order, others sorted."""
    seen = {label for label in labels if label}
    if not seen:
        return None
    order = [c.value for c in SymmetryClass]
    if seen <= set(order):
        return ClassSet(tuple(label for label in order if label in seen))
    return ClassSet(tuple(sorted(seen)))


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """
    Feature vectors with ids and optional labels.

    Attributes:
        ids: Record ids, unique
        labels: Class name per record, None for unlabeled records
        X: Float array of shape (n, dim)
    """

    ids: Tuple[str, ...]
    labels: Tuple[Optional[str], ...]
    X: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError(f"features must be an (n, d) array with d >= 1, got {X.shape}")
        ids = tuple(str(i) for i in self.ids)
        labels = tuple(self.labels)
        if not (len(ids) == len(labels) == X.shape[0]):
            raise ValueError("ids, labels and feature rows must have the same length")
        if len(set(ids)) != len(ids):
            raise DuplicateId("feature ids must be unique")
        if not np.all(np.isfinite(X)):
            raise NonFiniteValue("feature values must be finite")
        X.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "X", X)

    @classmethod
    def from_records(cls, records: Sequence[FeatureRecord], dim: Optional[int] = None):
        if not records:
            if dim is None:
                raise ValueError("dimension is required for an empty feature set")
            return cls((), (), np.zeros((0, dim)))
        return cls(
            tuple(r.id for r in records),
            tuple(r.label for r in records),
            np.array([r.features for r in records], dtype=np.float64),
        )

    @classmethod
    def from_arrays(
        cls,
        X: np.ndarray,
        labels: Sequence[Optional[str]],
        ids: Optional[Sequence[str]] = None,
    ) -> "FeatureSet":
        X = np.asarray(X, dtype=np.float64)
        if ids is None:
            ids = [f"r{i:05d}" for i in range(X.shape[0])]
        return cls(tuple(ids), tuple(labels), X)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])

    @property
    def classes(self) -> Optional[ClassSet]:
        """Classes of the labeled records, or None when nothing is labeled."""
        return _present_classes(self.labels)

    @property
    def records(self) -> Iterator[FeatureRecord]:
        for i, record_id in enumerate(self.ids):
            yield FeatureRecord(record_id, self.labels[i], tuple(float(v) for v in self.X[i]))

    def is_labeled(self) -> bool:
        return all(label for label in self.labels)

    def select(self, ids: Sequence[str]) -> "FeatureSet":
        """Records with the given ids, in the given order."""
        position = {record_id: i for i, record_id in enumerate(self.ids)}
        missing = [i for i in ids if i not in position]
        if missing:
            raise MissingRecord(f"{len(missing)} ids not in feature set, first {missing[0]!r}")
        rows = [position[i] for i in ids]
        return FeatureSet(
            tuple(self.ids[r] for r in rows),
            tuple(self.labels[r] for r in rows),
            self.X[rows] if rows else np.zeros((0, self.dim)),
        )

    def with_features(self, X: np.ndarray) -> "FeatureSet":
        return FeatureSet(self.ids, self.labels, X)


def _text(content: Union[str, bytes]) -> str:
    return content.decode("utf-8-sig") if isinstance(content, bytes) else content


def load_features(content: Union[str, bytes]) -> FeatureSet:
    """
    Parse a features CSV.

    The header must be ``id,label,f0,...,f{d-1}`` with d >= 1. An empty label cell marks
    an unlabeled (predict-only) record; symmetry labels are normalized case-insensitively.

    Raises:
        HeaderMismatch: Header is missing or malformed
        RaggedRow: Row length differs from the header
        NonFiniteValue: A feature cell is not a finite real number
        DuplicateId: An id appears twice
    """
    reader = csv.reader(io.StringIO(_text(content)))
    header = next(reader, None)
    if header is None:
        raise HeaderMismatch("features file is empty")
    header = [cell.strip() for cell in header]
    dim = len(header) - 2
    expected = ["id", "label"] + [f"f{i}" for i in range(max(dim, 0))]
    if dim < 1 or header != expected:
        raise HeaderMismatch(f"expected header id,label,f0,...; got {','.join(header[:5])}...")

    ids, labels, rows, seen = [], [], [], set()
    for number, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise RaggedRow(f"line {number} has {len(row)} cells, expected {len(header)}")
        record_id = row[0].strip()
        if record_id in seen:
            raise DuplicateId(f"feature id {record_id!r} appears twice")
        seen.add(record_id)
        try:
            values = [float(cell) for cell in row[2:]]
        except ValueError:
            raise NonFiniteValue(f"line {number}: non-numeric feature value") from None
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteValue(f"line {number}: non-finite feature value")
        ids.append(record_id)
        label = row[1].strip()
        labels.append(normalize_label(label) if label else None)
        rows.append(values)

    X = np.array(rows, dtype=np.float64) if rows else np.zeros((0, dim))
    logger.debug("loaded %d feature records of dimension %d", len(ids), dim)
    return FeatureSet(tuple(ids), tuple(labels), X)


def save_features(features: FeatureSet) -> str:
    """Render a FeatureSet as CSV; values use the shortest exact float spelling."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["id", "label"] + [f"f{i}" for i in range(features.dim)])
    for record in features.records:
        writer.writerow([record.id, record.label or ""] + [repr(v) for v in record.features])
    return buffer.getvalue()


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature affine map ``(x - mean) / std``; std is floored at EPSILON."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        std = np.maximum(np.array(self.std, dtype=np.float64), EPSILON)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("mean and std must be vectors of the same length")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def apply(self, features: FeatureSet) -> FeatureSet:
        return features.with_features(self.transform(features.X))

    def to_dict(self) -> Dict[str, List[float]]:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, data: Dict[str, Sequence[float]]) -> "Standardizer":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["std"], dtype=float))


def fit_standardizer(train: FeatureSet) -> Standardizer:
    """
    Fit per-feature mean and population standard deviation on the training records.

    Constant columns keep their exact value as mean, so they map to 0.

    Raises:
        EmptySet: ``train`` has no record
    """
    if len(train) == 0:
        raise EmptySet("cannot fit a standardizer on an empty feature set")
    X = train.X
    mean = X.mean(axis=0)
    constant = np.ptp(X, axis=0) == 0
    mean = np.where(constant, X[0], mean)
    return Standardizer(mean, X.std(axis=0))


@dataclass(frozen=True)
class SvmHyper:
    """
    SGD hyperparameters.

    Attributes:
        lam: L2 regularization strength (> 0)
        epochs: Passes over the training data (>= 1)
        project: Project w onto the ball of radius 1/sqrt(lam) after each step
        average: Return the mean iterate over the second half of all steps
        standardize: Fit a standardizer before ensemble training
    """

    lam: float = 1e-4
    epochs: int = 20
    project: bool = False
    average: bool = True
    standardize: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lam": self.lam,
            "epochs": self.epochs,
            "project": self.project,
            "average": self.average,
            "standardize": self.standardize,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SvmHyper":
        return cls(**data)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Binary linear classifier; a decision value >= 0 means ``pos_class``."""

    weights: np.ndarray
    bias: float
    pos_class: str
    neg_class: str
    objective_trace: Tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim != 1:
            raise ValueError("weights must be a vector")
        if self.pos_class == self.neg_class:
            raise ValueError("pos_class and neg_class must differ")
        if not (np.all(np.isfinite(weights)) and math.isfinite(self.bias)):
            raise NonFiniteValue("model parameters must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", float(self.bias))

    def decision(self, x: np.ndarray) -> float:
        return float(np.dot(self.weights, x) + self.bias)

    def decision_many(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pos": self.pos_class,
            "neg": self.neg_class,
            "bias": self.bias,
            "weights": [float(v) for v in self.weights],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LinearModel":
        weights = np.asarray(data["weights"], dtype=np.float64)
        return cls(weights, data["bias"], data["pos"], data["neg"])


def _objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    hinge = np.maximum(0.0, 1.0 - y * (X @ w + b))
    return float(0.5 * lam * np.dot(w, w) + hinge.mean())


def train_binary_sgd(
    X: np.ndarray,
    y: np.ndarray,
    hyper: Optional[SvmHyper] = None,
    seed: Union[int, np.random.SeedSequence] = 0,
    pos_class: str = "+1",
    neg_class: str = "-1",
) -> LinearModel:
    """
    Train a linear SVM with Pegasos-style SGD.

    Each epoch visits the examples in a fresh seeded permutation. At step t the weights
    shrink by ``1 - eta*lam`` and, when the example's margin is below 1, move by
    ``eta*y*x`` (bias by ``eta*y``), with ``eta = 1/(lam*t)``. The bias is not
    regularized.

    Args:
        X: Array of shape (n, d)
        y: Targets in {+1, -1}
        hyper: Hyperparameters (defaults to SvmHyper())
        seed: Seed of the shuffling stream
        pos_class: Class name of target +1
        neg_class: Class name of target -1

    Returns:
        LinearModel with the objective after every epoch in ``objective_trace``

    Raises:
        SingleClassData: One of the two targets is absent
    """
    hyper = hyper or SvmHyper()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"X must be (n, d) and y (n,), got {X.shape} and {y.shape}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("targets must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassData(f"training data for {pos_class} vs {neg_class} lacks a class")

    rng = np.random.default_rng(seed)
    n, d = X.shape
    lam = hyper.lam
    radius = 1.0 / math.sqrt(lam)
    total_steps = hyper.epochs * n
    average_from = total_steps // 2

    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    averaged = 0
    trace = []
    t = 0
    for _ in range(hyper.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            xi, yi = X[i], y[i]
            margin = yi * (np.dot(w, xi) + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * yi * xi
                b += eta * yi
            if hyper.project:
                norm = np.linalg.norm(w)
                if norm > radius:
                    w *= radius / norm
            if hyper.average and t > average_from:
                w_sum += w
                b_sum += b
                averaged += 1
        trace.append(_objective(w, b, X, y, lam))

    if hyper.average and averaged:
        w, b = w_sum / averaged, b_sum / averaged
    return LinearModel(w, b, pos_class, neg_class, objective_trace=tuple(trace))


@dataclass(frozen=True)
class Prediction:
    label: str
    votes: Dict[str, int]
    margins: Dict[str, float]


@dataclass(frozen=True, eq=False)
class OvoEnsemble:
    """
    One-vs-one ensemble of linear models.

    ``models`` follow the pair order (i, j), i < j, of ``classes``; the model of pair
    (i, j) has ``classes[i]`` as positive class.
    """

    models: Tuple[LinearModel, ...]
    classes: ClassSet
    standardizer: Standardizer
    hyper: SvmHyper = field(default_factory=SvmHyper)
    seed: int = 0

    def __post_init__(self):
        k = len(self.classes)
        if len(self.models) != k * (k - 1) // 2:
            raise ValueError(f"{k} classes need {k * (k - 1) // 2} models, got {len(self.models)}")
        for model in self.models:
            if model.weights.shape != (self.standardizer.dim,):
                raise DimensionMismatch("model and standardizer dimensions differ")
        object.__setattr__(self, "models", tuple(self.models))

    @property
    def dim(self) -> int:
        return self.standardizer.dim

    def to_dict(self) -> Dict[str, Any]:
        return {
            "classes": list(self.classes.labels),
            "standardizer": self.standardizer.to_dict(),
            "models": [model.to_dict() for model in self.models],
            "hyper": self.hyper.to_dict(),
            "seed": self.seed,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OvoEnsemble":
        """
        Rebuild an ensemble from its ``to_dict`` form.

        Raises:
            HeaderMismatch: A key is missing, unexpected or of the wrong type
        """
        try:
            return cls(
                models=tuple(LinearModel.from_dict(m) for m in data["models"]),
                classes=ClassSet(tuple(data["classes"])),
                standardizer=Standardizer.from_dict(data["standardizer"]),
                hyper=SvmHyper.from_dict(data["hyper"]),
                seed=int(data["seed"]),
            )
        except LesionSymmetryError:
            raise
        except KeyError as exc:
            raise HeaderMismatch(f"model lacks {exc.args[0]!r}") from None
        except (TypeError, ValueError, AttributeError) as exc:
            raise HeaderMismatch(f"malformed model: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "OvoEnsemble":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise HeaderMismatch(f"model is not valid JSON: {exc}") from exc


def _labeled(features: FeatureSet, what: str) -> FeatureSet:
    if len(features) == 0 or not features.is_labeled():
        raise UnlabeledData(f"{what} needs every record labeled")
    return features


def train_ovo(
    train: FeatureSet,
    hyper: Optional[SvmHyper] = None,
    seed: int = 0,
    workers: int = 1,
) -> OvoEnsemble:
    """
    Train one binary model per unordered class pair.

    The standardizer is fitted on the whole training set first. Pair k trains on the
    records of its two classes with the seed stream ``SeedSequence(seed).spawn(m)[k]``,
    so running pairs concurrently does not change any parameter.

    Args:
        train: Labeled training features
        hyper: Hyperparameters (defaults to SvmHyper())
        seed: Master seed
        workers: Number of threads training pairs concurrently

    Raises:
        UnlabeledData: A training record has no label
        TooFewClasses: Fewer than two classes are present
    """
    hyper = hyper or SvmHyper()
    train = _labeled(train, "training")
    classes = train.classes
    if len(classes) < 2:
        raise TooFewClasses(f"one-vs-one training needs two classes, got {list(classes)}")

    if hyper.standardize:
        standardizer = fit_standardizer(train)
    else:
        standardizer = Standardizer.identity(train.dim)
    X = standardizer.transform(train.X)
    labels = np.array(train.labels, dtype=object)
    pairs = list(combinations(range(len(classes)), 2))
    streams = np.random.SeedSequence(seed).spawn(len(pairs))

    def fit_pair(k: int) -> LinearModel:
        pos, neg = classes.labels[pairs[k][0]], classes.labels[pairs[k][1]]
        rows = (labels == pos) | (labels == neg)
        y = np.where(labels[rows] == pos, 1.0, -1.0)
        model = train_binary_sgd(X[rows], y, hyper, streams[k], pos, neg)
        logger.debug("trained %s vs %s on %d records", pos, neg, int(rows.sum()))
        return model

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            models = list(pool.map(fit_pair, range(len(pairs))))
    else:
        models = [fit_pair(k) for k in range(len(pairs))]

    logger.info("trained %d pair models over %d classes", len(models), len(classes))
    return OvoEnsemble(tuple(models), classes, standardizer, hyper, seed)


def predict(ensemble: OvoEnsemble, x: Sequence[float]) -> Prediction:
    """
    Predict the class of one feature vector by one-vs-one voting.

    Every pair model votes for the class on its side of the decision boundary and adds
    its decision value to the positive class margin and subtracts it from the negative
    one. Ties in votes go to the larger margin sum, then to the earlier class.

    Raises:
        DimensionMismatch: ``x`` does not match the ensemble dimension
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ensemble.dim,):
        raise DimensionMismatch(f"expected a vector of dimension {ensemble.dim}, got {x.shape}")
    z = ensemble.standardizer.transform(x)
    votes = {label: 0 for label in ensemble.classes}
    margins = {label: 0.0 for label in ensemble.classes}
    for model in ensemble.models:
        value = model.decision(z)
        votes[model.pos_class if value >= 0 else model.neg_class] += 1
        margins[model.pos_class] += value
        margins[model.neg_class] -= value

    best = None
    for label in ensemble.classes:
        key = (votes[label], margins[label])
        if best is None or key > best[0]:
            best = (key, label)
    return Prediction(best[1], votes, margins)


def predict_set(ensemble: OvoEnsemble, features: FeatureSet) -> List[Prediction]:
    if features.dim != ensemble.dim:
        raise DimensionMismatch(f"features have dimension {features.dim}, model {ensemble.dim}")
    return [predict(ensemble, row) for row in features.X]


def evaluate(ensemble: OvoEnsemble, test: FeatureSet) -> ConfusionMatrix:
    """
    Confusion matrix (rows = predicted) of the ensemble on labeled test records.

    Raises:
        UnlabeledData: The test set is empty or has unlabeled records
        DimensionMismatch: Dimensions differ
        UnknownLabel: A test label is not one of the ensemble classes
    """
    test = _labeled(test, "evaluation")
    predicted = [p.label for p in predict_set(ensemble, test)]
    return confusion_matrix(predicted, list(test.labels), ensemble.classes)


def predictions_to_csv(
    ids: Sequence[str], predictions: Sequence[Prediction], classes: ClassSet
) -> str:
    """Render ``image_id,label,votes_<class>...,margin_<class>...`` rows."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["image_id", "label"]
        + [f"votes_{c}" for c in classes]
        + [f"margin_{c}" for c in classes]
    )
    for record_id, prediction in zip(ids, predictions):
        writer.writerow(
            [record_id, prediction.label]
            + [prediction.votes[c] for c in classes]
            + [f"{prediction.margins[c]:.17g}" for c in classes]
        )
    return buffer.getvalue()
