"""Datasets, normalization, binary persistence, and synthetic benchmark data.

Binary formats are little-endian and bit-exact across platforms:

* dataset  -- magic ``AWSF``, version u32=1, n u64, f u32, dtype u8 (0 = f32),
              then a row-major f32 payload of n*f values
* labels   -- magic ``AWSL``, version u32=1, n u64, dtype u8 (1 = i32),
              then n i32 values, each >= -1
* model    -- magic ``AWSM``, version u32=1, x u32, y u32, f u32, then
              x*y*f f64 weights, then a u32 length-prefixed JSON blob holding
              the normalization record (JSON ``null`` when absent)

Dataset values live in float64 in memory; ingestion quantizes CSV and
generated data to the f32 grid the dataset format stores, so a save/load
roundtrip is a bit-exact identity.
"""

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, FormatError

DATA_MAGIC = b"AWSF"
LABEL_MAGIC = b"AWSL"
MODEL_MAGIC = b"AWSM"
FORMAT_VERSION = 1

_DATA_HEADER = struct.Struct("<4sIQIB")
_LABEL_HEADER = struct.Struct("<4sIQB")
_MODEL_HEADER = struct.Struct("<4sIIII")
_BLOB_LEN = struct.Struct("<I")

CSV_ROW_WARNING = 10**6


@dataclass
class NormalizationRecord:
    """Per-feature affine transform fitted by :func:`normalize`.

    ``center``/``scale`` hold the mean/std pair for zscore or the min/range
    pair for minmax; ``constant`` flags features whose scale degenerated to
    zero (their scale is stored as 1 and their output forced to 0).
    """

    method: str
    center: np.ndarray | None = None
    scale: np.ndarray | None = None
    constant: np.ndarray | None = None

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Transform new rows with the fitted parameters."""
        if self.method == "none":
            return np.array(values, dtype=np.float64)
        out = (np.asarray(values, dtype=np.float64) - self.center) / self.scale
        out[:, self.constant] = 0.0
        return out

    def to_json(self) -> str:
        if self.method == "none":
            return json.dumps({"method": "none"}, sort_keys=True)
        return json.dumps(
            {
                "method": self.method,
                "center": self.center.tolist(),
                "scale": self.scale.tolist(),
                "constant": self.constant.astype(int).tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NormalizationRecord":
        obj = json.loads(text)
        if obj["method"] == "none":
            return cls(method="none")
        return cls(
            method=obj["method"],
            center=np.asarray(obj["center"], dtype=np.float64),
            scale=np.asarray(obj["scale"], dtype=np.float64),
            constant=np.asarray(obj["constant"], dtype=bool),
        )


@dataclass
class Dataset:
    """An n x f matrix of finite feature values plus bookkeeping."""

    values: np.ndarray
    feature_names: list[str] | None = None
    norm: NormalizationRecord | None = None

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionMismatch("dataset values must be a 2-D matrix")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise FormatError("dataset must have at least one row and one feature")
        if not np.isfinite(self.values).all():
            raise FormatError("dataset contains NaN or Inf values")
        if self.feature_names is not None and len(self.feature_names) != self.values.shape[1]:
            raise DimensionMismatch("feature_names length does not match feature count")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def f(self) -> int:
        return self.values.shape[1]


@dataclass
class ClusterMap:
    """Per-point cluster ids, compact in [0, n_clusters)."""

    labels: np.ndarray
    n_clusters: int = field(default=0)

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.ndim != 1 or self.labels.size == 0:
            raise DimensionMismatch("cluster map must be a non-empty 1-D array")
        if self.n_clusters == 0:
            self.n_clusters = int(self.labels.max()) + 1
        if self.labels.min() < 0 or self.labels.max() >= self.n_clusters:
            raise FormatError("cluster labels out of range [0, n_clusters)")

    @property
    def n(self) -> int:
        return self.labels.shape[0]


def _quantize_f32(values: np.ndarray) -> np.ndarray:
    # snap to the f32 grid the on-disk format stores, keep f64 in memory
    return values.astype(np.float32).astype(np.float64)


def load_dataset(path, format: str = "binary") -> Dataset:
    """Read a dataset file.

    ``csv`` accepts an optional single header row of feature names and only
    numeric, finite cells. ``binary`` reads the AWSF container. Both reject
    NaN/Inf values.
    """
    if format == "csv":
        return _load_csv(path)
    if format == "binary":
        return _load_binary(path)
    raise ValueError(f"unknown dataset format {format!r}")


def _load_csv(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise FormatError(f"{path}: empty file")
        cells = [c.strip() for c in first.strip().split(",")]
        names = None
        try:
            header_row = [float(c) for c in cells]
        except ValueError:
            names = cells
            header_row = None
        rows = []
        if header_row is not None:
            rows.append(header_row)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rows.append([float(c) for c in line.strip().split(",")])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric cell") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: ragged rows")
    values = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(values).all():
        raise FormatError(f"{path}: NaN or Inf cell")
    if values.shape[0] > CSV_ROW_WARNING:
        import warnings

        warnings.warn(
            f"{path}: {values.shape[0]} CSV rows; the binary format is the scale path",
            stacklevel=2,
        )
    return Dataset(_quantize_f32(values), feature_names=names)


def _load_binary(path) -> Dataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _DATA_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n, f, dtype = _DATA_HEADER.unpack_from(raw)
    if magic != DATA_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != 0:
        raise FormatError(f"{path}: unknown dtype code {dtype}")
    payload = raw[_DATA_HEADER.size:]
    expected = n * f * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(n, f).astype(np.float64)
    if not np.isfinite(values).all():
        raise FormatError(f"{path}: NaN or Inf value in payload")
    return Dataset(values)


def save_dataset(path, data: Dataset) -> None:
    """Write the AWSF container (values are quantized to f32 on disk)."""
    with open(path, "wb") as fh:
        fh.write(_DATA_HEADER.pack(DATA_MAGIC, FORMAT_VERSION, data.n, data.f, 0))
        fh.write(np.ascontiguousarray(data.values, dtype="<f4").tobytes())


def load_labels(path) -> np.ndarray:
    """Read an AWSL label file into an int32 array (values >= -1)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _LABEL_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n, dtype = _LABEL_HEADER.unpack_from(raw)
    if magic != LABEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != 1:
        raise FormatError(f"{path}: unknown dtype code {dtype}")
    payload = raw[_LABEL_HEADER.size:]
    if len(payload) != n * 4:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, header implies {n * 4}")
    labels = np.frombuffer(payload, dtype="<i4").copy()
    if labels.size and labels.min() < -1:
        raise FormatError(f"{path}: label below -1")
    return labels


def save_labels(path, labels: np.ndarray) -> None:
    labels = np.ascontiguousarray(labels, dtype="<i4")
    if labels.size and labels.min() < -1:
        raise FormatError("labels below -1 are not representable")
    with open(path, "wb") as fh:
        fh.write(_LABEL_HEADER.pack(LABEL_MAGIC, FORMAT_VERSION, labels.shape[0], 1))
        fh.write(labels.tobytes())


def save_model(path, lattice, norm: NormalizationRecord | None = None) -> None:
    """Write the AWSM container: lattice weights plus the normalization record."""
    blob = ("null" if norm is None else norm.to_json()).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_HEADER.pack(MODEL_MAGIC, FORMAT_VERSION, lattice.x, lattice.y, lattice.f))
        fh.write(np.ascontiguousarray(lattice.weights, dtype="<f8").tobytes())
        fh.write(_BLOB_LEN.pack(len(blob)))
        fh.write(blob)


def load_model(path):
    """Read an AWSM container back into (Lattice, NormalizationRecord | None)."""
    from .som import Lattice

    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _MODEL_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, x, y, f = _MODEL_HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    off = _MODEL_HEADER.size
    w_bytes = x * y * f * 8
    if len(raw) < off + w_bytes + _BLOB_LEN.size:
        raise FormatError(f"{path}: weight payload size mismatch")
    weights = np.frombuffer(raw, dtype="<f8", count=x * y * f, offset=off).reshape(x * y, f).copy()
    off += w_bytes
    (blob_len,) = _BLOB_LEN.unpack_from(raw, off)
    off += _BLOB_LEN.size
    if len(raw) != off + blob_len:
        raise FormatError(f"{path}: record blob size mismatch")
    text = raw[off:].decode("utf-8")
    norm = None if text == "null" else NormalizationRecord.from_json(text)
    return Lattice(x=x, y=y, weights=weights), norm


def normalize(data: Dataset, method: str = "zscore") -> tuple[Dataset, NormalizationRecord]:
    """Rescale features and return the new dataset with its fitted record.

    zscore maps each feature to mean 0 / population std 1, minmax to [0, 1].
    Features that are exactly constant come out as all zeros and are flagged
    in the record.
    """
    if method == "none":
        record = NormalizationRecord(method="none")
        return Dataset(data.values, data.feature_names, record), record
    mins = data.values.min(axis=0)
    maxs = data.values.max(axis=0)
    constant = mins == maxs
    if method == "zscore":
        center = data.values.mean(axis=0)
        scale = data.values.std(axis=0)
    elif method == "minmax":
        center = mins
        scale = maxs - mins
    else:
        raise ValueError(f"unknown normalization method {method!r}")
    scale = np.where(constant, 1.0, scale)
    out = (data.values - center) / scale
    out[:, constant] = 0.0
    record = NormalizationRecord(method=method, center=center, scale=scale, constant=constant)
    return Dataset(out, data.feature_names, record), record


def generate_blobs(
    n: int, f: int, k: int, separation: float, seed: int
) -> tuple[Dataset, ClusterMap]:
    """Sample k unit-variance Gaussian blobs with centers >= separation apart.

    Centers sit on an integer grid scaled by ``separation`` (distinct grid
    points are at least one cell apart, so the spacing bound holds exactly).
    Sizes are near-equal with the remainder going to the lowest cluster ids,
    and rows are ordered cluster by cluster.
    """
    if separation < 0:
        raise ValueError("separation must be non-negative")
    if k < 1:
        raise ValueError("need at least one blob")
    if n < k:
        raise ValueError("need at least one point per blob")
    side = max(1, math.ceil(k ** (1.0 / f)))
    while side**f < k:
        side += 1
    centers = np.zeros((k, f))
    for i in range(k):
        rem = i
        for j in range(f):
            centers[i, j] = (rem % side) * separation
            rem //= side
    base, extra = divmod(n, k)
    sizes = [base + (1 if i < extra else 0) for i in range(k)]
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n, f))
    labels = np.empty(n, dtype=np.int32)
    start = 0
    for i, size in enumerate(sizes):
        values[start : start + size] += centers[i]
        labels[start : start + size] = i
        start += size
    return Dataset(_quantize_f32(values)), ClusterMap(labels, n_clusters=k)
