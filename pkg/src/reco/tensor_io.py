"""Binary tensor files and JSON manifests.

Every float tensor crossing the process boundary uses one self-describing
binary layout (extension ``.rtns``):

    magic    4 bytes  ASCII "RTNS"
    version  u8       currently 1
    dtype    u8       0 = IEEE-754 float32, little-endian
    ndim     u8       1..4
    dims     ndim x u32 little-endian
    payload  prod(dims) x f32, row-major (last dimension fastest)

Feature maps are stored channel-first (d, h, w). Archive manifests are
plain JSON; tensor paths inside them resolve relative to the manifest file.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestError, TensorFormatError

MAGIC = b"RTNS"
VERSION = 1
DTYPE_F32 = 0
MAX_NDIM = 4

_HEADER = struct.Struct("<4sBBB")


def write_tensor(shape, data, path) -> None:
    """Write ``data`` (row-major floats) with the given shape to ``path``.

    The written file round-trips bit-exactly through :func:`read_tensor`.
    """
    shape = [int(s) for s in shape]
    if not shape:
        raise TensorFormatError("shape must be nonempty")
    if len(shape) > MAX_NDIM:
        raise TensorFormatError(f"ndim {len(shape)} exceeds maximum {MAX_NDIM}")
    if any(s < 1 for s in shape):
        raise TensorFormatError(f"all dims must be >= 1, got {shape}")
    if any(s > 0xFFFFFFFF for s in shape):
        raise TensorFormatError(f"dims must fit in 32 bits, got {shape}")

    arr = np.ascontiguousarray(data, dtype="<f4")
    count = math.prod(shape)
    if arr.size != count:
        raise TensorFormatError(
            f"data has {arr.size} elements but shape {shape} requires {count}"
        )

    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, len(shape))
    dims = struct.pack(f"<{len(shape)}I", *shape)
    payload = arr.tobytes()
    Path(path).write_bytes(header + dims + payload)


def read_tensor(path) -> tuple[list[int], np.ndarray]:
    """Read a tensor file, returning ``(shape, flat float32 data)``.

    Any malformed byte stream raises :class:`TensorFormatError`; nothing
    else escapes short of an OS-level I/O failure.
    """
    raw = Path(path).read_bytes()
    return parse_tensor_bytes(raw)


def parse_tensor_bytes(raw: bytes) -> tuple[list[int], np.ndarray]:
    if len(raw) < _HEADER.size:
        raise TensorFormatError(
            f"stream too short for header: {len(raw)} < {_HEADER.size} bytes"
        )
    magic, version, dtype, ndim = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}, expected {VERSION}")
    if dtype != DTYPE_F32:
        raise TensorFormatError(f"unsupported dtype code {dtype}, expected {DTYPE_F32}")
    if not 1 <= ndim <= MAX_NDIM:
        raise TensorFormatError(f"ndim must be in 1..{MAX_NDIM}, got {ndim}")

    dims_end = _HEADER.size + 4 * ndim
    if len(raw) < dims_end:
        raise TensorFormatError("stream truncated inside the dims block")
    shape = list(struct.unpack(f"<{ndim}I", raw[_HEADER.size:dims_end]))
    if any(s < 1 for s in shape):
        raise TensorFormatError(f"all dims must be >= 1, got {shape}")

    expected = math.prod(shape) * 4
    actual = len(raw) - dims_end
    if actual != expected:
        raise TensorFormatError(
            f"payload has {actual} bytes but dims {shape} require {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=dims_end).copy()
    return shape, data


def read_tensor_array(path) -> np.ndarray:
    """Read a tensor file as a shaped float32 ndarray."""
    shape, data = read_tensor(path)
    return data.reshape(shape)


def write_tensor_array(arr, path) -> None:
    arr = np.asarray(arr, dtype=np.float32)
    write_tensor(list(arr.shape), arr.ravel(), path)


@dataclass
class ImageEntry:
    image_id: str
    feature_path: str
    saliency_path: str | None = None
    value_feature_path: str | None = None


@dataclass
class ArchiveManifest:
    """Per-concept list of retrieved images and their feature files.

    ``image_entries`` preserves retrieval order; ``k`` equals its length.
    Paths are stored as written and resolved against ``root`` when the
    manifest was loaded from disk.
    """

    concept_name: str
    image_entries: list[ImageEntry]
    k: int
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        if self.k != len(self.image_entries):
            raise ManifestError(
                f"k={self.k} but manifest lists {len(self.image_entries)} images"
            )
        if self.k < 1:
            raise ManifestError("archive must contain at least one image")
        ids = [e.image_id for e in self.image_entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ManifestError(f"duplicate image ids in manifest: {dupes}")

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def save(self, path) -> None:
        """Write the manifest; paths are rewritten relative to ``path``."""
        path = Path(path)
        base = path.resolve().parent

        def rel(stored: str | None) -> str | None:
            if stored is None:
                return None
            return os.path.relpath(self.resolve(stored).resolve(), base)

        doc = {
            "concept_name": self.concept_name,
            "k": self.k,
            "image_entries": [
                {
                    "image_id": e.image_id,
                    "feature_path": rel(e.feature_path),
                    **(
                        {"saliency_path": rel(e.saliency_path)}
                        if e.saliency_path
                        else {}
                    ),
                    **(
                        {"value_feature_path": rel(e.value_feature_path)}
                        if e.value_feature_path
                        else {}
                    ),
                }
                for e in self.image_entries
            ],
        }
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ArchiveManifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}: not valid JSON: {e}") from e
        try:
            entries = [
                ImageEntry(
                    image_id=str(item["image_id"]),
                    feature_path=str(item["feature_path"]),
                    saliency_path=item.get("saliency_path"),
                    value_feature_path=item.get("value_feature_path"),
                )
                for item in doc["image_entries"]
            ]
            manifest = cls(
                concept_name=str(doc["concept_name"]),
                image_entries=entries,
                k=int(doc["k"]),
                root=path.parent,
            )
        except KeyError as e:
            raise ManifestError(f"{path}: missing field {e}") from e
        missing = [
            e.image_id
            for e in manifest.image_entries
            if not manifest.resolve(e.feature_path).exists()
        ]
        if missing:
            raise ManifestError(f"{path}: feature files missing for ids {missing}")
        return manifest
