"""CICIDS-2017 style CSV loading, label repair, merging and numeric encoding."""
from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import BENIGN, DatasetSchema, FeatureMatrix, LabelColumn, binarize_labels
from .errors import IngestError, SchemaError

IMPUTE_MODES = ("zero", "median", "drop")

_NON_PRINTABLE = re.compile(r"[^\x20-\x7e]+")
_SPACES = re.compile(r"\s+")


@dataclass(frozen=True)
class RawTable:
    header: tuple[str, ...]
    rows: list[list[str]]
    source: str = "<memory>"
    rows_repaired: int = 0

    def __post_init__(self):
        object.__setattr__(self, "header", tuple(self.header))
        width = len(self.header)
        for i, row in enumerate(self.rows, start=1):
            if len(row) != width:
                raise IngestError(
                    f"{self.source}: row {i} has {len(row)} cells, expected {width}"
                )

    def column_index(self, name: str) -> int:
        try:
            return self.header.index(name)
        except ValueError:
            raise SchemaError(f"column {name!r} not found in {self.source}") from None


@dataclass
class IngestReport:
    files_read: int = 0
    rows_total: int = 0
    rows_repaired: int = 0
    cells_imputed: int = 0
    rows_dropped: int = 0
    n_features: int = 0
    classes: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "files_read": self.files_read,
            "rows_total": self.rows_total,
            "rows_repaired": self.rows_repaired,
            "cells_imputed": self.cells_imputed,
            "rows_dropped": self.rows_dropped,
            "n_features": self.n_features,
            "classes": dict(self.classes),
        }


@dataclass(frozen=True)
class Dataset:
    features: FeatureMatrix
    labels: LabelColumn
    schema: DatasetSchema
    report: IngestReport


def _dedupe(header: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for name in header:
        if name in seen:
            seen[name] += 1
            out.append(f"{name}.{seen[name]}")
        else:
            seen[name] = 0
            out.append(name)
    return out


def parse_csv_text(text: str, source: str = "<memory>", dedupe_headers: bool = False) -> RawTable:
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError(f"{source}: empty input") from None
    header = [h.strip() for h in header]
    if not any(header):
        raise IngestError(f"{source}: empty input")
    if len(set(header)) != len(header):
        if dedupe_headers:
            header = _dedupe(header)
        else:
            dup = sorted({h for h in header if header.count(h) > 1})
            raise IngestError(f"{source}: duplicate column names after trimming: {dup}")
    width = len(header)
    rows = []
    for i, row in enumerate(reader, start=1):
        if not row:
            continue  # blank line
        if len(row) != width:
            raise IngestError(
                f"{source}: row {i} (line {reader.line_num}) has {len(row)} cells, expected {width}"
            )
        rows.append(row)
    return RawTable(header, rows, source)


def read_csv(path, dedupe_headers: bool = False) -> RawTable:
    """Read one CSV file. Header cells are whitespace-trimmed.

    Bytes that are not valid UTF-8 decode to U+FFFD so that label repair can
    see them. Row numbers in errors count data rows from 1 (header excluded).
    """
    p = Path(path)
    if not p.is_file():
        raise IngestError(f"{p}: no such file")
    data = p.read_bytes()
    if not data.strip():
        raise IngestError(f"{p}: empty input")
    text = data.decode("utf-8-sig", errors="replace")
    return parse_csv_text(text, str(p), dedupe_headers)


def read_many(paths: Sequence, dedupe_headers: bool = False, max_workers: int = 4) -> list[RawTable]:
    """Read several files concurrently; results keep the input order."""
    if len(paths) <= 1:
        return [read_csv(p, dedupe_headers) for p in paths]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda p: read_csv(p, dedupe_headers), paths))


def repair_label(label: str) -> tuple[str, bool]:
    """Return (repaired label, whether a character repair happened)."""
    fixed, n = _NON_PRINTABLE.subn(" - ", label)
    return _SPACES.sub(" ", fixed).strip(), n > 0


def repair_labels(table: RawTable, label_name: str = "Label") -> RawTable:
    j = table.column_index(label_name)
    repaired = 0
    rows = []
    for row in table.rows:
        fixed, changed = repair_label(row[j])
        repaired += changed
        if fixed != row[j]:
            row = list(row)
            row[j] = fixed
        rows.append(row)
    return replace(table, rows=rows, rows_repaired=table.rows_repaired + repaired)


def merge_tables(tables: Sequence[RawTable]) -> RawTable:
    if not tables:
        raise IngestError("no tables to merge")
    first = tables[0]
    rows = list(first.rows)
    for t in tables[1:]:
        if t.header != first.header:
            missing = [c for c in first.header if c not in t.header]
            extra = [c for c in t.header if c not in first.header]
            detail = []
            if missing:
                detail.append(f"missing {missing}")
            if extra:
                detail.append(f"unexpected {extra}")
            if not detail:
                detail.append("same columns in a different order")
            raise SchemaError(
                f"header mismatch between {first.source} and {t.source}: " + "; ".join(detail)
            )
        rows.extend(t.rows)
    return RawTable(
        first.header,
        rows,
        "+".join(t.source for t in tables),
        sum(t.rows_repaired for t in tables),
    )


def _parse_float(cell: str) -> float | None:
    s = cell.strip()
    if not s:
        return math.nan
    try:
        return float(s)
    except ValueError:
        return None


def encode_column(cells: Iterable[str]) -> tuple[np.ndarray, dict[str, int] | None]:
    """Parse a column as reals, or as categorical codes if any cell is not numeric.

    Numeric columns may contain non-finite values; categorical codes follow
    first appearance.
    """
    cells = list(cells)
    parsed = [_parse_float(c) for c in cells]
    if all(v is not None for v in parsed):
        return np.array(parsed, dtype=np.float64), None
    mapping: dict[str, int] = {}
    codes = np.empty(len(cells), dtype=np.float64)
    for i, c in enumerate(cells):
        s = c.strip()
        if s not in mapping:
            mapping[s] = len(mapping)
        codes[i] = mapping[s]
    return codes, mapping


def impute_non_finite(values: np.ndarray, mode: str = "zero") -> tuple[np.ndarray, int, np.ndarray]:
    """Replace NaN/inf cells. Returns (values, cells imputed, kept-row mask)."""
    if mode not in IMPUTE_MODES:
        raise ValueError(f"impute mode must be one of {IMPUTE_MODES}, got {mode!r}")
    bad = ~np.isfinite(values)
    keep = np.ones(values.shape[0], dtype=bool)
    n_bad = int(bad.sum())
    if not n_bad:
        return values, 0, keep
    out = values.copy()
    if mode == "zero":
        out[bad] = 0.0
    elif mode == "median":
        for j in np.flatnonzero(bad.any(axis=0)):
            col = out[:, j]
            finite = col[np.isfinite(col)]
            col[bad[:, j]] = np.median(finite) if finite.size else 0.0
    else:
        keep = ~bad.any(axis=1)
        return out[keep], 0, keep
    return out, n_bad, keep


def encode_non_numeric(
    table: RawTable,
    label_name: str = "Label",
    benign_class: str = BENIGN,
    impute: str = "zero",
    schema: DatasetSchema | None = None,
) -> tuple[FeatureMatrix, LabelColumn, DatasetSchema, IngestReport]:
    """Turn a repaired table into numeric features and encoded labels.

    When ``schema`` is given (prediction time) its stored categorical maps
    are reused; unseen categories get the next free code.
    """
    j_label = table.column_index(label_name)
    feature_names = [h for i, h in enumerate(table.header) if i != j_label]
    n = len(table.rows)
    cols = list(zip(*table.rows)) if n else [() for _ in table.header]

    maps: dict[str, dict[str, int]] = {}
    values = np.empty((n, len(feature_names)), dtype=np.float64)
    k = 0
    for i, name in enumerate(table.header):
        if i == j_label:
            continue
        if schema is not None and name in schema.categorical_maps:
            known = dict(schema.categorical_maps[name])
            values[:, k] = [known.get(c.strip(), len(known)) for c in cols[i]]
            maps[name] = known
        else:
            col, mapping = encode_column(cols[i])
            values[:, k] = col
            if mapping is not None:
                maps[name] = mapping
        k += 1

    values, n_imputed, keep = impute_non_finite(values, impute)
    labels = [c.strip() for c in cols[j_label]]
    if not keep.all():
        labels = [s for s, m in zip(labels, keep) if m]
    if schema is not None and label_name in schema.categorical_maps:
        known = schema.categorical_maps[label_name]
        classes = sorted(known, key=known.get)
        classes += [s for s in dict.fromkeys(labels) if s not in known]
    else:
        classes = list(dict.fromkeys(labels))
        if benign_class not in classes:
            classes.append(benign_class)
    maps[label_name] = {c: i for i, c in enumerate(classes)}
    out_schema = DatasetSchema(tuple(feature_names), label_name, maps)
    label_col = binarize_labels(labels, benign_class, classes)
    report = IngestReport(
        files_read=len(table.source.split("+")),
        rows_total=n,
        rows_repaired=table.rows_repaired,
        cells_imputed=n_imputed,
        rows_dropped=int((~keep).sum()),
        n_features=len(feature_names),
        classes={c: int(np.sum(label_col.raw == i)) for i, c in enumerate(classes)},
    )
    return FeatureMatrix(values, out_schema), label_col, out_schema, report


def decode_column(codes: Sequence[int], mapping: dict[str, int]) -> list[str]:
    inverse = {v: s for s, v in mapping.items()}
    return [inverse[int(c)] for c in codes]


def load_tables(
    tables: Sequence[RawTable],
    label_name: str = "Label",
    benign_class: str = BENIGN,
    impute: str = "zero",
) -> Dataset:
    repaired = [repair_labels(t, label_name) for t in tables]
    merged = merge_tables(repaired)
    fm, labels, schema, report = encode_non_numeric(merged, label_name, benign_class, impute)
    report.files_read = len(tables)
    return Dataset(fm, labels, schema, report)


def load_dataset(
    paths,
    label_name: str = "Label",
    benign_class: str = BENIGN,
    impute: str = "zero",
    dedupe_headers: bool = False,
) -> Dataset:
    """Read, repair, merge and encode one or more CSV files."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    return load_tables(read_many(list(paths), dedupe_headers), label_name, benign_class, impute)


def write_normalized_csv(path, dataset: Dataset) -> None:
    """Export the encoded dataset: same header order, repaired labels, numeric cells."""
    schema = dataset.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(schema.feature_names) + [schema.label_name])
        names = dataset.labels.raw_names
        for row, label in zip(dataset.features.values, names):
            w.writerow([repr(float(v)) for v in row] + [label])


def encode_features(table: RawTable, schema: DatasetSchema, impute: str = "zero") -> tuple[np.ndarray, int]:
    """Encode a table for a trained model: columns must match ``schema``.

    A label column, if present, is ignored. ``drop`` imputation falls back to
    ``zero`` so every input row keeps its prediction.
    """
    present = [h for h in table.header if h != schema.label_name]
    missing = [c for c in schema.feature_names if c not in present]
    if missing:
        raise SchemaError(f"input lacks column {missing[0]!r}" + (f" (+{len(missing) - 1} more)" if len(missing) > 1 else ""))
    extra = [c for c in present if c not in schema.feature_names]
    if extra:
        raise SchemaError(f"input has unexpected column {extra[0]!r}")
    n = len(table.rows)
    values = np.empty((n, schema.n_features), dtype=np.float64)
    for k, name in enumerate(schema.feature_names):
        j = table.header.index(name)
        cells = [row[j] for row in table.rows]
        if name in schema.categorical_maps:
            known = schema.categorical_maps[name]
            values[:, k] = [known.get(c.strip(), len(known)) for c in cells]
            continue
        col, mapping = encode_column(cells)
        if mapping is not None:
            bad = next(c for c in cells if _parse_float(c) is None)
            raise SchemaError(f"column {name!r} was numeric at training time but holds {bad!r}")
        values[:, k] = col
    values, n_imputed, _ = impute_non_finite(values, "zero" if impute == "drop" else impute)
    return values, n_imputed
