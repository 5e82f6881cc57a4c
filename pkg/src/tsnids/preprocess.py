"""Min-max feature scaling fitted on training rows only."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FeatureMatrix
from .errors import SchemaError

NORMALIZER_MODES = ("standard", "paper-literal")


@dataclass(frozen=True)
class NormalizerModel:
    """Per-column extrema plus the output convention.

    ``standard`` maps a column onto [0, 1] via (x - min) / (max - min).
    ``paper-literal`` uses (x - max) / (max - min), which lands in [-1, 0].
    """

    col_min: np.ndarray
    col_max: np.ndarray
    mode: str = "standard"

    def __post_init__(self):
        if self.mode not in NORMALIZER_MODES:
            raise ValueError(f"normalizer mode must be one of {NORMALIZER_MODES}, got {self.mode!r}")
        lo = np.array(self.col_min, dtype=np.float64)
        hi = np.array(self.col_max, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise SchemaError("min/max vectors must be 1-D and equal length")
        if np.any(lo > hi):
            raise ValueError("column min exceeds column max")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "col_min", lo)
        object.__setattr__(self, "col_max", hi)

    @property
    def n_features(self) -> int:
        return self.col_min.shape[0]

    @property
    def output_range(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.mode == "standard" else (-1.0, 0.0)


def _values(data) -> np.ndarray:
    if isinstance(data, FeatureMatrix):
        return data.values
    return np.asarray(data, dtype=np.float64)


def fit_normalizer(train, mode: str = "standard") -> NormalizerModel:
    x = _values(train)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("cannot fit a normalizer on an empty matrix")
    if not np.isfinite(x).all():
        raise ValueError("training matrix contains non-finite values")
    return NormalizerModel(x.min(axis=0), x.max(axis=0), mode)


def apply_normalizer(model: NormalizerModel, data) -> np.ndarray:
    """Scale ``data`` with stored extrema; out-of-range values are clamped.

    Constant columns (max == min) become 0 in both modes.
    """
    x = _values(data)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise SchemaError(
            f"normalizer fitted on {model.n_features} columns, got shape {x.shape}"
        )
    span = model.col_max - model.col_min
    const = span == 0
    safe = np.where(const, 1.0, span)
    anchor = model.col_min if model.mode == "standard" else model.col_max
    u = (x - anchor) / safe
    lo, hi = model.output_range
    np.clip(u, lo, hi, out=u)
    u[:, const] = 0.0
    return u
