"""Patch-level feature storage: the binary feature file and grid geometry.

File layout (MDPM-FEAT v1, little-endian throughout):

    header   20 bytes    magic b"MDPM" | u32 version=1 | u32 dim | u64 count
    record   20+4*dim    u32 image_id | i32 class_label |
                         u16 x | u16 y | u16 w | u16 h | f32 scale |
                         dim * f32 activations

Activations are stored as float32 and must be non-negative; negative values
are rejected at read time rather than clamped so exporter bugs surface early.
The same byte layout doubles as a container for image-level encoding vectors
(geometry zeroed, values unrestricted) via ``write_vector_file`` /
``read_vector_file``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

MAGIC = b"MDPM"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_RECORD_FIXED = struct.Struct("<IiHHHHf")

_U16_MAX = 0xFFFF


class FeatfileError(Exception):
    """Base class for feature-file problems."""


class FormatError(FeatfileError):
    """The stream is not a valid MDPM-FEAT v1 file."""


class TruncationError(FormatError):
    """The stream ended in the middle of a record."""

    def __init__(self, message: str, record_index: int | None = None):
        super().__init__(message)
        self.record_index = record_index


class ValidationError(FeatfileError):
    """Decoded content violates store invariants."""


class SinkError(FeatfileError):
    """The destination failed mid-write; ``offset`` is the failing byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class PatchGeometry:
    """Axis-aligned patch in the resized image's pixel frame."""

    x: int
    y: int
    w: int
    h: int
    scale: float = 1.0

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0 or v > _U16_MAX:
                raise ValueError(f"geometry {name}={v!r} outside u16 range")
        if self.w <= 0 or self.h <= 0:
            raise ValueError("patch width and height must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        # quantize so in-memory value round-trips through the f32 field
        object.__setattr__(self, "scale", float(np.float32(self.scale)))

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True, eq=False)
class PatchRecord:
    """One sampled patch: provenance, geometry, and its activation vector."""

    image_id: int
    class_label: int
    geometry: PatchGeometry
    activation: np.ndarray

    def __post_init__(self):
        if not 0 <= self.image_id <= 0xFFFFFFFF:
            raise ValueError("image_id must fit in u32")
        if self.class_label < -1:
            raise ValueError("class_label must be >= -1 (-1 = background)")
        act = np.asarray(self.activation, dtype=np.float32)
        if act.ndim != 1:
            raise ValueError("activation must be a 1-d vector")
        if act.size and float(act.min()) < 0.0:
            raise ValueError("activation components must be non-negative")
        object.__setattr__(self, "activation", act)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PatchRecord):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and self.class_label == other.class_label
            and self.geometry == other.geometry
            and np.array_equal(self.activation, other.activation)
        )

    __hash__ = None


class FeatureStore:
    """Immutable ordered collection of patch records with one feature dim."""

    __slots__ = ("dim", "records", "image_index")

    def __init__(self, dim: int, records: Iterable[PatchRecord] = ()):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        recs = tuple(records)
        for i, rec in enumerate(recs):
            if rec.activation.size != dim:
                raise ValueError(
                    f"record {i} has dim {rec.activation.size}, store dim {dim}"
                )
        index: dict[int, list[int]] = {}
        for i, rec in enumerate(recs):
            index.setdefault(rec.image_id, []).append(i)
        self.dim = dim
        self.records = recs
        self.image_index = {k: tuple(v) for k, v in index.items()}

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureStore):
            return NotImplemented
        return self.dim == other.dim and self.records == other.records

    def activations(self, positions: Sequence[int] | None = None) -> np.ndarray:
        """Stack activations into a (n, dim) float32 matrix."""
        recs = self.records if positions is None else [self.records[i] for i in positions]
        if not recs:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([r.activation for r in recs])

    def labels(self) -> np.ndarray:
        return np.array([r.class_label for r in self.records], dtype=np.int64)

    def image_ids(self) -> np.ndarray:
        return np.array([r.image_id for r in self.records], dtype=np.int64)


def _open_sink(destination) -> tuple[BinaryIO, bool]:
    if isinstance(destination, (str, Path)):
        return open(destination, "wb"), True
    return destination, False


def _open_source(source) -> tuple[BinaryIO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "rb"), True
    return source, False


def write_featfile(store: FeatureStore, destination) -> int:
    """Serialize ``store`` to MDPM-FEAT v1; returns the byte count written."""
    rows = (
        (r.image_id, r.class_label, r.geometry.x, r.geometry.y,
         r.geometry.w, r.geometry.h, r.geometry.scale, r.activation)
        for r in store.records
    )
    return _write_records(store.dim, len(store.records), rows, destination)


def write_vector_file(dim: int, rows: Sequence[tuple[int, int, np.ndarray]],
                      destination) -> int:
    """Write (image_id, class_label, vector) rows with zeroed geometry.

    Same byte layout as ``write_featfile``; values may be negative, so this is
    the container for encoding vectors.
    """
    packed = ((iid, lab, 0, 0, 0, 0, 0.0, np.asarray(vec, dtype=np.float32))
              for iid, lab, vec in rows)
    return _write_records(dim, len(rows), packed, destination)


def _write_records(dim: int, count: int, rows, destination) -> int:
    f, own = _open_sink(destination)
    offset = 0

    def put(chunk: bytes):
        nonlocal offset
        try:
            f.write(chunk)
        except OSError as exc:
            raise SinkError(f"write failed at byte offset {offset}: {exc}", offset) from exc
        offset += len(chunk)

    try:
        put(_HEADER.pack(MAGIC, VERSION, dim, count))
        for image_id, label, x, y, w, h, scale, vec in rows:
            put(_RECORD_FIXED.pack(image_id, label, x, y, w, h, scale))
            if vec.size != dim:
                raise ValueError(f"vector length {vec.size} != dim {dim}")
            put(vec.astype("<f4", copy=False).tobytes())
    finally:
        if own:
            f.close()
    return offset


def _read_exact(f: BinaryIO, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise EOFError
    return data


def _read_header(f: BinaryIO) -> tuple[int, int]:
    try:
        raw = _read_exact(f, _HEADER.size)
    except EOFError:
        raise FormatError("stream shorter than the 20-byte header") from None
    magic, version, dim, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if dim < 1:
        raise FormatError("header dim must be >= 1")
    return dim, count


def _read_rows(f: BinaryIO, dim: int, count: int):
    body = struct.Struct(f"<{dim}f")
    for i in range(count):
        try:
            fixed = _read_exact(f, _RECORD_FIXED.size)
            blob = _read_exact(f, body.size)
        except EOFError:
            raise TruncationError(f"stream truncated inside record {i}", i) from None
        image_id, label, x, y, w, h, scale = _RECORD_FIXED.unpack(fixed)
        vec = np.frombuffer(blob, dtype="<f4").copy()
        yield i, image_id, label, x, y, w, h, scale, vec


def read_featfile(source) -> FeatureStore:
    """Parse an MDPM-FEAT v1 stream back into a :class:`FeatureStore`."""
    f, own = _open_source(source)
    try:
        dim, count = _read_header(f)
        records = []
        for i, image_id, label, x, y, w, h, scale, vec in _read_rows(f, dim, count):
            if vec.size and float(vec.min()) < 0.0:
                raise ValidationError(f"record {i} has a negative activation component")
            try:
                geom = PatchGeometry(x, y, w, h, scale)
                records.append(PatchRecord(image_id, label, geom, vec))
            except ValueError as exc:
                raise ValidationError(f"record {i}: {exc}") from exc
        return FeatureStore(dim, records)
    finally:
        if own:
            f.close()


def read_vector_file(source) -> tuple[int, list[tuple[int, int, np.ndarray]]]:
    """Read rows written by :func:`write_vector_file` (geometry ignored)."""
    f, own = _open_source(source)
    try:
        dim, count = _read_header(f)
        rows = [(image_id, label, vec)
                for _, image_id, label, _x, _y, _w, _h, _s, vec in _read_rows(f, dim, count)]
        return dim, rows
    finally:
        if own:
            f.close()


def sample_patch_grid(image_w: int, image_h: int, patch: int, stride: int) -> list[PatchGeometry]:
    """All stride-aligned patch positions fully inside the image, row-major.

    Returns an empty list when the patch exceeds either image side.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if patch < 1:
        raise ValueError("patch must be >= 1")
    if patch > image_w or patch > image_h:
        return []
    return [
        PatchGeometry(x, y, patch, patch)
        for y in range(0, image_h - patch + 1, stride)
        for x in range(0, image_w - patch + 1, stride)
    ]
