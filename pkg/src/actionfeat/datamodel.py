"""Shared domain types, the DESC1 binary descriptor format, and dataset manifests.

Every stage of the pipeline exchanges data through the types defined here.
Descriptor payloads live on disk in the DESC1 format:

    bytes 0..4   magic ``b"DESC1"``
    bytes 5..12  row count n, unsigned 64-bit little-endian
    bytes 13..20 dimension d, unsigned 64-bit little-endian
    bytes 21..   n*d IEEE-754 32-bit little-endian floats, row-major

Model files bundle several DESC1 blocks behind a small JSON index (see
``write_block_file``).  Dataset manifests are JSON documents listing classes,
videos (with per-layer source files) and named train/test splits.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DESC1_MAGIC = b"DESC1"
_DESC1_HEADER = struct.Struct("<QQ")

ENCODING_KINDS = (
    "objects1k",
    "avgpool",
    "vlad",
    "fisher",
    "lcd-vlad",
    "lcd-fisher",
    "fused",
)

# Encodings of these kinds carry the two-stage normalization and must be
# unit-norm (or identically zero on degenerate input).
NORMALIZED_KINDS = ("vlad", "fisher", "lcd-vlad", "lcd-fisher")


class DescriptorFormatError(ValueError):
    """Raised for malformed DESC1 files or non-finite payloads."""


class ManifestError(ValueError):
    """Raised when a dataset manifest violates its invariants."""


class EmptyVideoError(ValueError):
    """Raised when an encoder receives zero frames/descriptors."""


class DegenerateInputError(ValueError):
    """Raised when fitting is impossible (e.g. zero-variance samples)."""


def _as_matrix(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype != np.float32:
        arr = arr.astype(np.float64)
    if arr.ndim != 2:
        raise ValueError(f"descriptor matrix must be 2-D, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise ValueError("descriptor dimensionality must be >= 1")
    if not np.all(np.isfinite(arr)):
        raise DescriptorFormatError("invalid descriptor value (non-finite)")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DescriptorMatrix:
    """n rows of d-dimensional descriptors; the universal currency between stages.

    ``values`` is a read-only (n, d) array, float32 when it came from disk and
    float64 when produced by in-pipeline computation.  Storage is always
    32-bit; computation may carry higher precision.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_matrix(self.values))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class ActivationTensor:
    """One frame's a x a x M activation block from the last pooling layer.

    ``values`` has shape (a, a, M); entry [r, c, m] is filter m's response at
    spatial location (r, c).
    """

    values: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.dtype != np.float32:
            arr = arr.astype(np.float64)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"activation tensor must be (a, a, M), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[2] < 1:
            raise ValueError("activation tensor sides and channels must be >= 1")
        if not np.all(np.isfinite(arr)):
            raise DescriptorFormatError("invalid descriptor value (non-finite)")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def side(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class Encoding:
    """A fixed-length per-video feature vector plus provenance."""

    kind: str
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        if self.kind not in ENCODING_KINDS:
            raise ValueError(f"unknown encoding kind {self.kind!r}")
        arr = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise ValueError("encoding must have dim >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("encoding values must be finite")
        if self.kind in NORMALIZED_KINDS:
            norm = float(np.linalg.norm(arr))
            if norm != 0.0 and abs(norm - 1.0) > 1e-6:
                raise ValueError(
                    f"{self.kind} encoding must be unit-norm or zero, got norm {norm!r}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class VideoRecord:
    """One video: identity, class label, frame count and per-layer source files."""

    id: str
    label: int
    frame_count: int
    sources: dict[str, Path]
    pool5_side: int | None = None

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError(f"video {self.id!r}: frame_count must be >= 1")
        if self.label < 0:
            raise ValueError(f"video {self.id!r}: label must be >= 0")


@dataclass(frozen=True)
class Dataset:
    """An ordered class list, video records, and named train/test splits."""

    classes: tuple[str, ...]
    videos: tuple[VideoRecord, ...]
    splits: dict[str, tuple[tuple[str, ...], tuple[str, ...]]]
    _by_id: dict[str, VideoRecord] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_id: dict[str, VideoRecord] = {}
        for v in self.videos:
            if v.id in by_id:
                raise ManifestError(f"duplicate video id {v.id!r}")
            if v.label >= len(self.classes):
                raise ManifestError(
                    f"video {v.id!r}: label {v.label} out of range for "
                    f"{len(self.classes)} classes"
                )
            by_id[v.id] = v
        for name, (train, test) in self.splits.items():
            overlap = set(train) & set(test)
            if overlap:
                raise ManifestError(
                    f"split leakage in split {name!r}: {sorted(overlap)}"
                )
            for vid in (*train, *test):
                if vid not in by_id:
                    raise ManifestError(f"unknown video {vid!r} in split {name!r}")
        object.__setattr__(self, "_by_id", by_id)

    def video(self, vid: str) -> VideoRecord:
        try:
            return self._by_id[vid]
        except KeyError:
            raise ManifestError(f"unknown video {vid!r}") from None

    def split(self, name: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
        try:
            return self.splits[name]
        except KeyError:
            raise ManifestError(f"unknown split {name!r}") from None


# ---------------------------------------------------------------------------
# DESC1 file I/O


def write_descriptor_file(path, m: DescriptorMatrix) -> None:
    """Write ``m`` to ``path`` in the DESC1 format (float32 payload)."""
    path = Path(path)
    payload = np.ascontiguousarray(m.values, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(DESC1_MAGIC)
            fh.write(_DESC1_HEADER.pack(m.rows, m.dim))
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write descriptor file {path}: {exc}") from exc


def read_descriptor_file(path) -> DescriptorMatrix:
    """Read a DESC1 file back into a (float32) DescriptorMatrix.

    Inverse of :func:`write_descriptor_file`: the roundtrip is bit-exact for
    float32 matrices.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read descriptor file {path}: {exc}") from exc
    m, _ = _parse_desc1(blob, 0, str(path))
    return m


def _parse_desc1(blob: bytes, offset: int, name: str) -> tuple[DescriptorMatrix, int]:
    """Parse one DESC1 record from ``blob`` at ``offset``; return (matrix, end)."""
    magic = blob[offset : offset + len(DESC1_MAGIC)]
    if magic != DESC1_MAGIC:
        raise DescriptorFormatError(f"{name}: not a DESC1 file")
    hdr_start = offset + len(DESC1_MAGIC)
    hdr_end = hdr_start + _DESC1_HEADER.size
    if len(blob) < hdr_end:
        raise DescriptorFormatError(f"{name}: corrupt descriptor file (short header)")
    n, d = _DESC1_HEADER.unpack(blob[hdr_start:hdr_end])
    if d < 1:
        raise DescriptorFormatError(f"{name}: corrupt descriptor file (d = {d})")
    end = hdr_end + n * d * 4
    if len(blob) < end:
        raise DescriptorFormatError(f"{name}: corrupt descriptor file (truncated payload)")
    values = np.frombuffer(blob[hdr_end:end], dtype="<f4").reshape(n, d)
    if not np.all(np.isfinite(values)):
        raise DescriptorFormatError(f"{name}: invalid descriptor value (non-finite)")
    return DescriptorMatrix(values), end


# ---------------------------------------------------------------------------
# JSON-indexed containers of DESC1 blocks (model serialization)


def write_block_file(path, meta: dict, blocks: list[tuple[str, np.ndarray]]) -> None:
    """Write named 2-D float arrays as DESC1 blocks behind a JSON index.

    Layout: u32 LE header length, JSON header, then the blocks back to back,
    each a verbatim DESC1 record.  Byte output is deterministic for equal
    inputs (sorted JSON keys, fixed block order).
    """
    path = Path(path)
    header = {"meta": meta, "blocks": [name for name, _ in blocks]}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    try:
        with open(path, "wb") as fh:
            fh.write(struct.pack("<I", len(header_bytes)))
            fh.write(header_bytes)
            for _, arr in blocks:
                arr = np.asarray(arr)
                if arr.ndim == 1:
                    arr = arr.reshape(1, -1)
                fh.write(DESC1_MAGIC)
                fh.write(_DESC1_HEADER.pack(arr.shape[0], arr.shape[1]))
                fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    except OSError as exc:
        raise OSError(f"cannot write model file {path}: {exc}") from exc


def read_block_file(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a JSON-indexed block container; arrays come back as float64."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read model file {path}: {exc}") from exc
    if len(blob) < 4:
        raise DescriptorFormatError(f"{path}: corrupt model file")
    (hdr_len,) = struct.unpack("<I", blob[:4])
    try:
        header = json.loads(blob[4 : 4 + hdr_len])
    except ValueError as exc:
        raise DescriptorFormatError(f"{path}: corrupt model file header") from exc
    offset = 4 + hdr_len
    arrays: dict[str, np.ndarray] = {}
    for name in header["blocks"]:
        m, offset = _parse_desc1(blob, offset, str(path))
        arrays[name] = m.values.astype(np.float64)
    return header["meta"], arrays


# ---------------------------------------------------------------------------
# Dataset manifest


def load_manifest(path) -> Dataset:
    """Load and fully validate a dataset manifest.

    Source file paths are resolved relative to the manifest's directory and
    checked for existence.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    except ValueError as exc:
        raise ManifestError(f"{path}: not a JSON manifest: {exc}") from exc

    for key in ("classes", "videos", "splits"):
        if key not in doc:
            raise ManifestError(f"{path}: manifest missing key {key!r}")
    classes = tuple(str(c) for c in doc["classes"])
    if not classes:
        raise ManifestError(f"{path}: manifest declares no classes")

    root = path.parent
    videos = []
    for entry in doc["videos"]:
        sources = {}
        for layer, rel in entry.get("sources", {}).items():
            src = (root / rel).resolve() if not Path(rel).is_absolute() else Path(rel)
            if not src.is_file():
                raise ManifestError(
                    f"missing source {rel!r} (layer {layer!r}) for video "
                    f"{entry.get('id')!r}"
                )
            sources[str(layer)] = src
        videos.append(
            VideoRecord(
                id=str(entry["id"]),
                label=int(entry["label"]),
                frame_count=int(entry["frame_count"]),
                sources=sources,
                pool5_side=(
                    int(entry["pool5_side"]) if entry.get("pool5_side") is not None else None
                ),
            )
        )

    splits = {}
    for name, pair in doc["splits"].items():
        train = tuple(str(v) for v in pair.get("train", ()))
        test = tuple(str(v) for v in pair.get("test", ()))
        splits[str(name)] = (train, test)

    return Dataset(classes=classes, videos=tuple(videos), splits=splits)


def save_manifest(path, dataset: Dataset) -> None:
    """Write ``dataset`` as a manifest JSON with sources relative to ``path``."""
    path = Path(path)
    root = path.parent
    videos = []
    for v in dataset.videos:
        entry = {
            "id": v.id,
            "label": v.label,
            "frame_count": v.frame_count,
            "sources": {
                layer: _relative_to(src, root) for layer, src in sorted(v.sources.items())
            },
        }
        if v.pool5_side is not None:
            entry["pool5_side"] = v.pool5_side
        videos.append(entry)
    doc = {
        "classes": list(dataset.classes),
        "videos": videos,
        "splits": {
            name: {"train": list(train), "test": list(test)}
            for name, (train, test) in dataset.splits.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _relative_to(src: Path, root: Path) -> str:
    try:
        return src.resolve().relative_to(root.resolve()).as_posix()
    except ValueError:
        return str(src)
