"""Single-file, versioned, checksummed model bundles.

Layout (all integers little-endian)::

    magic        8 bytes   b"TSNIDS\\x00\\x01"
    version      u16       FORMAT_VERSION
    reserved     u16       0
    header_len   u32       length of the JSON header
    blob_len     u64       length of the array blob
    header       JSON, UTF-8, sorted keys; arrays appear as {"$array": i}
    blob         arrays back to back, each C-order, dtype given in the header
    sha256       32 bytes over everything above

The header's ``arrays`` list gives name, dtype (explicit byte order, e.g.
``<f8``), shape, offset and byte length for each array.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .core import DatasetSchema
from .errors import CorruptBundleError, UnsupportedVersionError
from .forest import ForestConfig, ForestModel, Tree
from .neuralnet import AutoencoderParams, DenseLayerParams, SoftmaxHead, StackedAutoencoderModel
from .pipeline import PipelineConfig, PipelineModel, StageOneModel, StageTwoModel
from .preprocess import NormalizerModel

MAGIC = b"TSNIDS\x00\x01"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)
_PREFIX = struct.Struct("<8sHHIQ")
_DIGEST = 32


class _Packer:
    def __init__(self):
        self.entries: list[dict] = []
        self.chunks: list[bytes] = []
        self.offset = 0

    def add(self, name: str, arr: np.ndarray) -> dict:
        arr = np.asarray(arr)
        dtype = "<i8" if arr.dtype.kind in "iub" else "<f8"
        data = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        self.entries.append({"name": name, "dtype": dtype, "shape": list(arr.shape),
                             "offset": self.offset, "nbytes": len(data)})
        self.chunks.append(data)
        self.offset += len(data)
        return {"$array": len(self.entries) - 1}


class _Unpacker:
    def __init__(self, entries: list[dict], blob: bytes):
        self.entries = entries
        self.blob = blob

    def get(self, ref) -> np.ndarray:
        try:
            e = self.entries[ref["$array"]]
            dtype = np.dtype(e["dtype"])
            if dtype.str not in ("<i8", "<f8"):
                raise ValueError(dtype)
            end = e["offset"] + e["nbytes"]
            if end > len(self.blob) or e["nbytes"] != dtype.itemsize * int(np.prod(e["shape"], dtype=np.int64)):
                raise ValueError("array extent")
            arr = np.frombuffer(self.blob, dtype=dtype, count=e["nbytes"] // dtype.itemsize, offset=e["offset"])
            return arr.reshape(e["shape"]).astype(dtype.newbyteorder("="))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise CorruptBundleError(f"bad array reference {ref!r}: {exc}") from None


def _pack_stack(p: _Packer, name: str, m: StackedAutoencoderModel | None):
    if m is None:
        return None
    return {
        "activation": m.activation,
        "decoder_activation": m.decoder_activation,
        "input_dim": m.input_dim,
        "hidden_dims": m.hidden_dims,
        "layers": [
            {
                "weight": p.add(f"{name}.{k}.weight", ae.encoder.weight),
                "bias": p.add(f"{name}.{k}.bias", ae.encoder.bias),
                "decoder_bias": p.add(f"{name}.{k}.decoder_bias", ae.decoder_bias),
                "tied": ae.tied,
            }
            for k, ae in enumerate(m.layers)
        ],
    }


def _unpack_stack(u: _Unpacker, d) -> StackedAutoencoderModel | None:
    if d is None:
        return None
    layers = [
        AutoencoderParams(DenseLayerParams(u.get(l["weight"]), u.get(l["bias"])), u.get(l["decoder_bias"]), l["tied"])
        for l in d["layers"]
    ]
    return StackedAutoencoderModel(layers, d["activation"], d["decoder_activation"])


def _pack_head(p: _Packer, name: str, h: SoftmaxHead | None):
    if h is None:
        return None
    return {"weight": p.add(f"{name}.weight", h.weight), "bias": p.add(f"{name}.bias", h.bias)}


def _unpack_head(u: _Unpacker, d) -> SoftmaxHead | None:
    return None if d is None else SoftmaxHead(u.get(d["weight"]), u.get(d["bias"]))


def _pack_forest(p: _Packer, f: ForestModel | None):
    if f is None:
        return None
    sizes = np.array([t.n_nodes for t in f.trees], dtype=np.int64)
    cat = lambda attr: np.concatenate([getattr(t, attr) for t in f.trees])  # noqa: E731
    return {
        "n_classes": f.n_classes,
        "n_features": f.n_features,
        "feature_subset_size": f.feature_subset_size,
        "config": {k: getattr(f.config, k) for k in ForestConfig.__dataclass_fields__},
        "tree_sizes": p.add("forest.tree_sizes", sizes),
        "feature": p.add("forest.feature", cat("feature")),
        "threshold": p.add("forest.threshold", cat("threshold")),
        "left": p.add("forest.left", cat("left")),
        "right": p.add("forest.right", cat("right")),
        "counts": p.add("forest.counts", np.vstack([t.counts for t in f.trees])),
    }


def _unpack_forest(u: _Unpacker, d) -> ForestModel | None:
    if d is None:
        return None
    sizes = u.get(d["tree_sizes"])
    arrays = {k: u.get(d[k]) for k in ("feature", "threshold", "left", "right", "counts")}
    if int(sizes.sum()) != arrays["feature"].shape[0]:
        raise CorruptBundleError("forest node count does not match tree sizes")
    bounds = np.r_[0, np.cumsum(sizes)]
    trees = [
        Tree(*(arrays[k][a:b] for k in ("feature", "threshold", "left", "right", "counts")))
        for a, b in zip(bounds[:-1], bounds[1:])
    ]
    return ForestModel(trees, d["n_classes"], d["n_features"], d["feature_subset_size"], ForestConfig(**d["config"]))


def model_to_bytes(model: PipelineModel) -> bytes:
    p = _Packer()
    s1, s2 = model.stage1, model.stage2
    header = {
        "format": "tsnids-bundle",
        "artifact_version": model.version,
        "schema": model.schema.to_dict(),
        "classes": list(model.classes),
        "benign_class": model.benign_class,
        "config": model.config.to_dict(),
        "anomaly_threshold": None if model.anomaly_threshold is None else p.add(
            "anomaly_threshold", np.array([model.anomaly_threshold])),
        "stage1": {
            "normalizer": {
                "mode": s1.normalizer.mode,
                "min": p.add("normalizer.min", s1.normalizer.col_min),
                "max": p.add("normalizer.max", s1.normalizer.col_max),
            },
            "dsae": _pack_stack(p, "stage1.dsae", s1.dsae),
            "head": _pack_head(p, "stage1.head", s1.head),
        },
        "stage2": None if s2 is None else {
            "dsae": _pack_stack(p, "stage2.dsae", s2.dsae),
            "head": _pack_head(p, "stage2.head", s2.head),
            "forest": _pack_forest(p, s2.forest),
        },
    }
    header["arrays"] = p.entries
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = b"".join(p.chunks)
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, 0, len(head), len(blob)) + head + blob
    return body + hashlib.sha256(body).digest()


def model_from_bytes(data: bytes) -> PipelineModel:
    if len(data) < _PREFIX.size:
        raise CorruptBundleError(f"bundle truncated: {len(data)} bytes")
    magic, version, _, head_len, blob_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CorruptBundleError("not a model bundle (bad magic)")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersionError(
            f"bundle format version {version} is not supported (this build reads {list(SUPPORTED_VERSIONS)})"
        )
    expected = _PREFIX.size + head_len + blob_len + _DIGEST
    if len(data) != expected:
        raise CorruptBundleError(f"bundle is {len(data)} bytes, header declares {expected}")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptBundleError("checksum mismatch")
    try:
        header = json.loads(body[_PREFIX.size:_PREFIX.size + head_len].decode("utf-8"))
        u = _Unpacker(header["arrays"], body[_PREFIX.size + head_len:])
        s1 = header["stage1"]
        norm = s1["normalizer"]
        stage1 = StageOneModel(
            NormalizerModel(u.get(norm["min"]), u.get(norm["max"]), norm["mode"]),
            _unpack_stack(u, s1["dsae"]),
            _unpack_head(u, s1["head"]),
        )
        s2 = header["stage2"]
        stage2 = None if s2 is None else StageTwoModel(
            _unpack_stack(u, s2["dsae"]), _unpack_forest(u, s2["forest"]), _unpack_head(u, s2["head"])
        )
        thr = header["anomaly_threshold"]
        return PipelineModel(
            DatasetSchema.from_dict(header["schema"]),
            tuple(header["classes"]),
            header["benign_class"],
            PipelineConfig.from_dict(header["config"]),
            stage1,
            stage2,
            None if thr is None else float(u.get(thr)[0]),
            header["artifact_version"],
        )
    except CorruptBundleError:
        raise
    except (KeyError, TypeError, ValueError, UnicodeDecodeError) as exc:
        raise CorruptBundleError(f"malformed bundle header: {exc}") from None


def save_model(model: PipelineModel, path) -> Path:
    p = Path(path)
    p.write_bytes(model_to_bytes(model))
    return p


def load_model(path) -> PipelineModel:
    return model_from_bytes(Path(path).read_bytes())


__all__ = ["save_model", "load_model", "model_to_bytes", "model_from_bytes", "FORMAT_VERSION", "__version__"]
