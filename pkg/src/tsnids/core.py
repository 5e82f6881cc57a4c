"""Shared data types: feature matrices, labels, schema, metrics and seeding."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import SchemaError

BENIGN = "BENIGN"


class RandomSource:
    """Seeded generator with deterministic child streams.

    Children are keyed by integers, so a fold, tree or layer always receives
    the same stream no matter in which order the children are requested.
    """

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in _key)
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "RandomSource":
        return RandomSource(self.seed, self.key + tuple(key))

    def child_seed(self, *key: int) -> int:
        """A 63-bit integer seed for components that take a plain seed."""
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=self.key + tuple(key))
        return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, key={self.key})"


@dataclass(frozen=True)
class DatasetSchema:
    feature_names: tuple[str, ...]
    label_name: str = "Label"
    # column name -> {original string: code}; label column included when encoded
    categorical_maps: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        names = tuple(self.feature_names)
        object.__setattr__(self, "feature_names", names)
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate feature names: {dup}")
        if self.label_name in names:
            raise SchemaError(f"label column {self.label_name!r} listed as a feature")
        for col, mapping in self.categorical_maps.items():
            codes = sorted(mapping.values())
            if codes != list(range(len(codes))):
                raise SchemaError(f"categorical map for {col!r} is not a 0..k-1 bijection")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "label_name": self.label_name,
            "categorical_maps": {
                k: sorted(v.items(), key=lambda kv: kv[1]) for k, v in self.categorical_maps.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        maps = {k: {s: int(c) for s, c in pairs} for k, pairs in d["categorical_maps"].items()}
        return cls(tuple(d["feature_names"]), d["label_name"], maps)


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-major real-valued table bound to a schema."""

    values: np.ndarray
    schema: DatasetSchema

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise SchemaError(f"feature matrix must be 2-D, got shape {v.shape}")
        if v.shape[1] != self.schema.n_features:
            raise SchemaError(
                f"matrix has {v.shape[1]} columns but schema lists {self.schema.n_features}"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def take(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(self.values[idx], self.schema)


@dataclass(frozen=True)
class LabelColumn:
    """Per-row class codes plus the derived benign(0)/attack(1) view."""

    raw: np.ndarray
    binary: np.ndarray
    classes: tuple[str, ...]
    benign_class: str = BENIGN

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=np.int64)
        binary = np.asarray(self.binary, dtype=np.int64)
        if raw.shape != binary.shape or raw.ndim != 1:
            raise SchemaError("raw and binary label views must be aligned 1-D arrays")
        raw.flags.writeable = False
        binary.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "binary", binary)
        object.__setattr__(self, "classes", tuple(self.classes))

    def __len__(self):
        return len(self.raw)

    @property
    def benign_code(self) -> int:
        return self.classes.index(self.benign_class)

    @property
    def raw_names(self) -> list[str]:
        return [self.classes[c] for c in self.raw]

    def take(self, idx) -> "LabelColumn":
        return LabelColumn(self.raw[idx], self.binary[idx], self.classes, self.benign_class)


def binarize_labels(
    raw_labels: Sequence[str] | LabelColumn,
    benign_class: str = BENIGN,
    classes: Sequence[str] | None = None,
) -> LabelColumn:
    """Map class names to the two-class view: benign -> 0, anything else -> 1.

    ``classes`` is the label column's categorical map in code order. When it
    is omitted the map is built from ``raw_labels`` in first-appearance
    order, in which case ``benign_class`` must occur among the rows.
    """
    if isinstance(raw_labels, LabelColumn):
        classes = raw_labels.classes
        names = raw_labels.raw_names
    else:
        names = [str(s) for s in raw_labels]
    if classes is None:
        classes = list(dict.fromkeys(names))
    classes = tuple(classes)
    if benign_class not in classes:
        raise SchemaError(f"benign class {benign_class!r} not in label map {list(classes)}")
    code = {c: i for i, c in enumerate(classes)}
    try:
        raw = np.array([code[s] for s in names], dtype=np.int64)
    except KeyError as exc:
        raise SchemaError(f"label {exc.args[0]!r} missing from label map") from None
    binary = (raw != code[benign_class]).astype(np.int64)
    return LabelColumn(raw, binary, classes, benign_class)


@dataclass(frozen=True)
class ConfusionCounts:
    """Two-class confusion counts with attack as the positive class."""

    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionCounts":
        t = np.asarray(y_true).astype(bool)
        p = np.asarray(y_pred).astype(bool)
        if t.shape != p.shape:
            raise SchemaError(f"label/prediction length mismatch: {t.shape} vs {p.shape}")
        return cls(
            tp=int(np.sum(t & p)),
            tn=int(np.sum(~t & ~p)),
            fp=int(np.sum(~t & p)),
            fn=int(np.sum(t & ~p)),
        )


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts | None = None
    folds: tuple["MetricsReport", ...] = ()

    def as_dict(self) -> dict:
        d = {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.counts is not None:
            d.update(tp=self.counts.tp, tn=self.counts.tn, fp=self.counts.fp, fn=self.counts.fn)
        return d


def compute_metrics(counts: ConfusionCounts) -> MetricsReport:
    """Accuracy, precision, recall and F1 from confusion counts.

    Zero denominators yield 0 instead of raising. F1 is evaluated as
    2tp / (2tp + fp + fn), which equals 2PR/(P+R) whenever P+R > 0 and keeps
    the result correctly rounded.
    """
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    total = counts.total
    if total == 0:
        raise ValueError("cannot compute metrics over zero samples")
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return MetricsReport(accuracy, precision, recall, f1, counts)


def evaluate_binary(y_true, y_pred) -> MetricsReport:
    return compute_metrics(ConfusionCounts.from_predictions(y_true, y_pred))
