"""Seeded CICIDS-shaped synthetic flow tables.

The generator writes the same CSV dialect the ingest path reads, optionally
with the pathologies found in the real files: leading spaces in header cells,
``Infinity``/``NaN`` cells and labels whose separator byte was mangled into
U+FFFD.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BENIGN, RandomSource

MOJIBAKE = "\ufffd"


@dataclass(frozen=True)
class ClassSpec:
    name: str
    weight: float = 1.0
    mean: Sequence[float] | None = None  # per-feature, in units of the feature scale
    spread: float | None = None  # overrides SynthSpec.noise for this class


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 2000
    n_features: int = 80
    classes: tuple[ClassSpec, ...] = (ClassSpec(BENIGN), ClassSpec("DDoS"))
    noise: float = 0.05
    seed: int = 0
    inf_cells: int = 0
    nan_cells: int = 0
    mojibake: bool = False
    header_whitespace: bool = False
    categorical_column: bool = False
    label_name: str = "Label"

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.n_rows < 0:
            raise ValueError("n_rows must be non-negative")
        if self.n_features < 2:
            raise ValueError("n_features must be at least 2")
        if len(self.classes) < 1:
            raise ValueError("at least one class is required")
        if len({c.name for c in self.classes}) != len(self.classes):
            raise ValueError("class names must be unique")
        for c in self.classes:
            if not c.weight > 0:
                raise ValueError(f"class {c.name!r} has non-positive weight")
            if c.mean is not None and len(c.mean) != self.n_features:
                raise ValueError(f"class {c.name!r} mean has {len(c.mean)} entries, expected {self.n_features}")
        if self.inf_cells < 0 or self.nan_cells < 0:
            raise ValueError("defect counts must be non-negative")
        if self.inf_cells + self.nan_cells > self.n_rows * self.n_features:
            raise ValueError("more defect cells requested than the table holds")
        if self.mojibake and not any(" - " in c.name for c in self.classes):
            raise ValueError("mojibake injection needs a class name containing ' - '")

    @property
    def feature_names(self) -> list[str]:
        names = [f"Feature {j:02d}" for j in range(self.n_features)]
        if self.categorical_column:
            names.append("Protocol")
        return names


@dataclass(frozen=True)
class SynthResult:
    csv_bytes: bytes
    labels: list[str]
    features: np.ndarray
    defects: dict = field(default_factory=dict)

    def write(self, path) -> Path:
        p = Path(path)
        p.write_bytes(self.csv_bytes)
        return p


def _class_counts(spec: SynthSpec, gen: np.random.Generator) -> np.ndarray:
    w = np.array([c.weight for c in spec.classes], dtype=np.float64)
    return gen.multinomial(spec.n_rows, w / w.sum())


def generate(spec: SynthSpec) -> SynthResult:
    """Draw rows class by class from Gaussian clusters, shuffle, then serialize.

    Each feature j has a magnitude ``scale[j]`` spread over four decades, as
    in real flow statistics. Class means default to independent uniform
    draws in [0, 1] per feature, which leaves the classes far apart in 80
    dimensions.
    """
    root = RandomSource(spec.seed)
    gen = root.child(0).generator
    d = spec.n_features
    scale = 10.0 ** gen.uniform(0.0, 4.0, size=d)
    counts = _class_counts(spec, root.child(1).generator)

    blocks, labels = [], []
    for k, (cls, n_k) in enumerate(zip(spec.classes, counts)):
        cg = root.child(2, k).generator
        mean = np.asarray(cls.mean, dtype=np.float64) if cls.mean is not None else cg.uniform(0.0, 1.0, size=d)
        spread = spec.noise if cls.spread is None else cls.spread
        blocks.append(np.abs(mean + spread * cg.standard_normal((n_k, d))) * scale)
        labels += [cls.name] * int(n_k)
    x = np.vstack(blocks) if blocks else np.empty((0, d))
    order = root.child(3).generator.permutation(x.shape[0])
    x = x[order]
    labels = [labels[i] for i in order]

    cells = [[f"{v:.6g}" for v in row] for row in x]
    # Ground truth is what the file holds, before defects are injected.
    x = np.array([[float(c) for c in row] for row in cells]).reshape(x.shape)
    if spec.categorical_column:
        pg = root.child(4).generator
        protos = np.array(["TCP", "UDP", "ICMP"])[pg.integers(0, 3, size=x.shape[0])]
        for row, p in zip(cells, protos):
            row.append(str(p))

    dg = root.child(5).generator
    n_bad = spec.inf_cells + spec.nan_cells
    flat = dg.choice(x.shape[0] * d, size=n_bad, replace=False) if n_bad else np.empty(0, dtype=np.int64)
    for i, cell in enumerate(flat):
        r, c = divmod(int(cell), d)
        if i < spec.inf_cells:
            cells[r][c] = "-Infinity" if i % 5 == 4 else "Infinity"
        else:
            cells[r][c] = "NaN"

    written = list(labels)
    n_mojibake = 0
    if spec.mojibake:
        for i, name in enumerate(labels):
            if " - " in name:
                written[i] = name.replace(" - ", f" {MOJIBAKE} ")
                n_mojibake += 1

    header = spec.feature_names + [spec.label_name]
    if spec.header_whitespace:
        header = [h if j == 0 else " " + h for j, h in enumerate(header)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row, lab in zip(cells, written):
        w.writerow(row + [lab])

    defects = {
        "inf_cells": spec.inf_cells,
        "nan_cells": spec.nan_cells,
        "cells_non_finite": n_bad,
        "mojibake_rows": n_mojibake,
        "class_counts": {c.name: int(n) for c, n in zip(spec.classes, counts)},
    }
    return SynthResult(buf.getvalue().encode("utf-8"), labels, x, defects)


def separable_two_class(n_rows=2000, n_features=80, seed=0, defects=False, attack="DDoS") -> SynthSpec:
    """The benchmark used by the acceptance suite: two well-separated clusters."""
    kw = {}
    if defects:
        kw = dict(inf_cells=25, nan_cells=15, mojibake=True, header_whitespace=True)
        if " - " not in attack:
            attack = "Web Attack - Brute Force"
    return SynthSpec(n_rows, n_features, (ClassSpec(BENIGN), ClassSpec(attack)), seed=seed, **kw)


def to_dataset(result: SynthResult, label_name: str = "Label", benign_class: str = BENIGN, impute: str = "zero"):
    """Run generated bytes through the real ingest path."""
    from .ingest import load_tables, parse_csv_text

    table = parse_csv_text(result.csv_bytes.decode("utf-8"), "<synthetic>")
    return load_tables([table], label_name, benign_class, impute)


def split_rows(result: SynthResult, n_parts: int) -> list[bytes]:
    """Cut a generated CSV into ``n_parts`` files sharing the header."""
    lines = result.csv_bytes.decode("utf-8").splitlines(keepends=True)
    header, body = lines[0], lines[1:]
    bounds = np.linspace(0, len(body), n_parts + 1).astype(int)
    return [(header + "".join(body[a:b])).encode("utf-8") for a, b in zip(bounds[:-1], bounds[1:])]
