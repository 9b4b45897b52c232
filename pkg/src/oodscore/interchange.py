"""On-disk dataset container: binary tensor files plus a JSON manifest.

Tensor file layout (all integers little-endian):

    bytes 0..7    magic ``OODTNSR1``
    byte  8       dtype code: 0 = f32, 1 = f64, 2 = i32
    byte  9       rank (1 or 2)
    next  8*rank  dims as u64
    rest          row-major payload, little-endian

The manifest is a JSON object::

    {
      "feature_dim": d,
      "num_classes": c,
      "head": {"weights": path, "bias": path},
      "splits": {name: {"features": path, "labels": path-or-absent}, ...}
    }

All paths are relative to the manifest's directory. Loading validates every
cross-shape invariant before anything is returned; a failed load raises and
never yields a partial dataset. Stored f32 tensors are widened to f64 for
computation.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InvalidManifest,
    LabelOutOfRange,
    MalformedHeader,
    MissingFile,
    NonFiniteValues,
    ShapeMismatch,
    SizeMismatch,
    UnsupportedDtype,
)

MAGIC = b"OODTNSR1"
TENSOR_SUFFIX = ".tnsr"
CSV_CELL_LIMIT = 10_000

_CODE_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i4")}
_DTYPE_TO_CODE = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("int32"): 2}


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a binary tensor file, preserving its stored dtype."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    raw = path.read_bytes()
    if len(raw) < 10:
        raise MalformedHeader(f"{path}: file shorter than fixed header")
    if raw[:8] != MAGIC:
        raise MalformedHeader(f"{path}: bad magic {raw[:8]!r}")
    code, rank = raw[8], raw[9]
    if code not in _CODE_TO_DTYPE:
        raise UnsupportedDtype(f"{path}: dtype code {code}")
    if rank not in (1, 2):
        raise MalformedHeader(f"{path}: rank {rank} not supported")
    header_len = 10 + 8 * rank
    if len(raw) < header_len:
        raise MalformedHeader(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{rank}Q", raw, 10)
    dtype = _CODE_TO_DTYPE[code]
    expected = int(np.prod(dims, dtype=object)) * dtype.itemsize
    payload = raw[header_len:]
    if len(payload) != expected:
        raise SizeMismatch(
            f"{path}: payload is {len(payload)} bytes, shape {tuple(dims)} "
            f"needs {expected}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return arr.copy()  # decouple from the raw buffer; writable


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    """Write an array as a binary tensor file.

    The array dtype must be float32, float64, or int32 and the rank 1 or 2.
    """
    arr = np.ascontiguousarray(array)
    dtype = arr.dtype.newbyteorder("=")
    if np.dtype(dtype) not in _DTYPE_TO_CODE:
        raise UnsupportedDtype(f"cannot store dtype {arr.dtype}")
    if arr.ndim not in (1, 2):
        raise MalformedHeader(f"cannot store rank-{arr.ndim} tensor")
    code = _DTYPE_TO_CODE[np.dtype(dtype)]
    header = MAGIC + bytes([code, arr.ndim]) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
    Path(path).write_bytes(header + le.tobytes(order="C"))


def read_tensor_csv(path: str | Path) -> np.ndarray:
    """Read a small CSV fixture as an f64 tensor.

    One row per line; a file whose rows all have a single cell becomes a
    rank-1 vector, anything else a rank-2 matrix. Limited to
    ``CSV_CELL_LIMIT`` cells so the escape hatch stays an escape hatch.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells:
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise InvalidManifest(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise InvalidManifest(f"{path}: empty CSV tensor")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidManifest(f"{path}: ragged CSV rows")
    if len(rows) * width > CSV_CELL_LIMIT:
        raise InvalidManifest(
            f"{path}: {len(rows) * width} cells exceeds CSV limit of {CSV_CELL_LIMIT}"
        )
    arr = np.asarray(rows, dtype=np.float64)
    if width == 1:
        return arr.ravel()
    return arr


@dataclass(frozen=True)
class ClassifierHead:
    """Final linear layer: ``logits = weights @ feature + bias``."""

    weights: np.ndarray  # (c, d) float64
    bias: np.ndarray  # (c,) float64

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ShapeMismatch(
                f"head weights {w.shape} incompatible with bias {b.shape}"
            )
        if w.shape[0] < 2:
            raise InvalidManifest("classifier head needs at least 2 classes")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NonFiniteValues("classifier head contains non-finite entries")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Split:
    """One named slice of a dataset: features and optional labels."""

    features: np.ndarray  # (N, d) float64
    labels: np.ndarray | None = None  # (N,) int64


@dataclass(frozen=True)
class Dataset:
    feature_dim: int
    num_classes: int
    head: ClassifierHead
    splits: dict[str, Split] = field(default_factory=dict)


def _load_referenced(base: Path, rel: str, allow_csv: bool, name: str) -> np.ndarray:
    target = base / rel
    if allow_csv and target.suffix.lower() == ".csv":
        return read_tensor_csv(target)
    if not target.is_file():
        raise MissingFile(f"{name}: {target}")
    return read_tensor(target)


def _as_features(arr: np.ndarray, name: str, d: int) -> np.ndarray:
    if arr.ndim != 2 or arr.shape[1] != d or arr.shape[0] < 1:
        raise ShapeMismatch(f"{name}: expected [N, {d}] with N >= 1, got {arr.shape}")
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if not np.isfinite(out).all():
        raise NonFiniteValues(f"{name} contains NaN or Inf")
    return out


def _as_labels(arr: np.ndarray, name: str, n: int, c: int) -> np.ndarray:
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ShapeMismatch(f"{name}: expected [{n}] labels, got {arr.shape}")
    values = np.asarray(arr)
    if not np.isfinite(values.astype(np.float64)).all():
        raise NonFiniteValues(f"{name} contains non-finite labels")
    rounded = np.rint(values.astype(np.float64))
    if not np.array_equal(rounded, values.astype(np.float64)):
        raise LabelOutOfRange(f"{name}: labels must be integers")
    ints = rounded.astype(np.int64)
    if ints.size and (ints.min() < 0 or ints.max() >= c):
        raise LabelOutOfRange(
            f"{name}: label values must lie in [0, {c}), got "
            f"[{ints.min()}, {ints.max()}]"
        )
    return ints


def load_dataset(manifest_path: str | Path, allow_csv: bool = False) -> Dataset:
    """Load and validate a dataset container.

    Every invariant is checked before the dataset is assembled, so a raise
    never leaves the caller holding a partially validated object.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFile(str(manifest_path))
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidManifest(f"{manifest_path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidManifest(f"{manifest_path}: manifest must be a JSON object")

    for key in ("feature_dim", "num_classes", "head", "splits"):
        if key not in doc:
            raise InvalidManifest(f"{manifest_path}: missing '{key}'")
    d, c = doc["feature_dim"], doc["num_classes"]
    if not isinstance(d, int) or d < 1:
        raise InvalidManifest(f"feature_dim must be a positive integer, got {d!r}")
    if not isinstance(c, int) or c < 2:
        raise InvalidManifest(f"num_classes must be an integer >= 2, got {c!r}")
    head_doc = doc["head"]
    if not isinstance(head_doc, dict) or "weights" not in head_doc or "bias" not in head_doc:
        raise InvalidManifest("head must name 'weights' and 'bias' tensors")
    splits_doc = doc["splits"]
    if not isinstance(splits_doc, dict):
        raise InvalidManifest("splits must be a JSON object")

    base = manifest_path.parent
    weights = _load_referenced(base, head_doc["weights"], allow_csv, "head weights")
    bias = _load_referenced(base, head_doc["bias"], allow_csv, "head bias")
    if weights.ndim != 2 or tuple(weights.shape) != (c, d):
        raise ShapeMismatch(
            f"head weights: expected [{c}, {d}], got {tuple(weights.shape)}"
        )
    if bias.ndim != 1 or bias.shape[0] != c:
        raise ShapeMismatch(f"head bias: expected [{c}], got {tuple(bias.shape)}")
    head = ClassifierHead(weights=weights, bias=bias)

    splits: dict[str, Split] = {}
    for name, entry in splits_doc.items():
        if not isinstance(entry, dict) or "features" not in entry:
            raise InvalidManifest(f"split '{name}' must name a features tensor")
        feats = _as_features(
            _load_referenced(base, entry["features"], allow_csv, f"{name} features"),
            f"{name} features",
            d,
        )
        labels = None
        if entry.get("labels") is not None:
            labels = _as_labels(
                _load_referenced(base, entry["labels"], allow_csv, f"{name} labels"),
                f"{name} labels",
                feats.shape[0],
                c,
            )
        splits[name] = Split(features=feats, labels=labels)

    return Dataset(feature_dim=d, num_classes=c, head=head, splits=splits)


def save_dataset(
    out_dir: str | Path,
    head: ClassifierHead,
    splits: dict[str, Split],
    dtype: str = "f64",
    manifest_name: str = "manifest.json",
) -> Path:
    """Write a dataset container and return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = {"f32": np.float32, "f64": np.float64}[dtype]

    def put(name: str, arr: np.ndarray) -> str:
        rel = name + TENSOR_SUFFIX
        write_tensor(out / rel, arr)
        return rel

    doc: dict = {
        "feature_dim": head.feature_dim,
        "num_classes": head.num_classes,
        "head": {
            "weights": put("head_weights", head.weights.astype(store)),
            "bias": put("head_bias", head.bias.astype(store)),
        },
        "splits": {},
    }
    for name, split in splits.items():
        entry = {"features": put(f"{name}_features", split.features.astype(store))}
        if split.labels is not None:
            entry["labels"] = put(f"{name}_labels", split.labels.astype(np.int32))
        doc["splits"][name] = entry
    manifest = out / manifest_name
    manifest.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return manifest
