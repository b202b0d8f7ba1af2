"""File formats: ASCII point clouds and the binary tensor archive.

Cloud files hold one point per line, ``x y z`` or ``x y z label``, with ``#``
starting a comment.  Archives are little-endian throughout: magic ``RTLH``,
u32 version (currently 1), u32 tensor count, then per tensor a u32 name
length, the UTF-8 name, a u8 rank, rank u64 dims, and the float32 payload.
Every malformed input maps to a structured error, never a crash.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ArchiveFormatError, CloudFormatError

MAGIC = b"RTLH"
VERSION = 1


def read_cloud(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Parse a cloud file into ``(points (N, 3), labels (N,) or None)``."""
    path = Path(path)
    points: list[list[float]] = []
    labels: list[int] = []
    arity = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) not in (3, 4):
                raise CloudFormatError(
                    f"{path}:{lineno}: expected 3 or 4 fields, got {len(tokens)}"
                )
            if arity is None:
                arity = len(tokens)
            elif len(tokens) != arity:
                raise CloudFormatError(
                    f"{path}:{lineno}: mixed arity ({len(tokens)} fields after {arity})"
                )
            try:
                values = [float(t) for t in tokens]
            except ValueError as exc:
                raise CloudFormatError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            points.append(values[:3])
            if arity == 4:
                labels.append(int(round(values[3])))
    if not points:
        raise CloudFormatError(f"{path}: no data lines")
    pts = np.asarray(points, dtype=float)
    return pts, (np.asarray(labels, dtype=np.int64) if arity == 4 else None)


def write_cloud(path, points: np.ndarray, labels: np.ndarray | None = None) -> None:
    """Write a cloud at 9 significant digits, preserving point order."""
    points = np.asarray(points, dtype=float)
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, (x, y, z) in enumerate(points):
            if labels is None:
                fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")
            else:
                fh.write(f"{x:.9g} {y:.9g} {z:.9g} {int(labels[i])}\n")


def write_archive(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors as float32; names must be unique (dict keys are)."""
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def _read_exact(fh, count: int, path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ArchiveFormatError(f"{path}: truncated while reading {what}")
    return data


def read_archive(path) -> dict[str, np.ndarray]:
    """Read an archive back into a name-to-array dict (float64 values)."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    with path.open("rb") as fh:
        if _read_exact(fh, 4, path, "magic") != MAGIC:
            raise ArchiveFormatError(f"{path}: bad magic, not a tensor archive")
        version, count = struct.unpack("<II", _read_exact(fh, 8, path, "header"))
        if version != VERSION:
            raise ArchiveFormatError(f"{path}: unsupported version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "name length"))
            name = _read_exact(fh, name_len, path, "name").decode("utf-8")
            if name in out:
                raise ArchiveFormatError(f"{path}: duplicate tensor name {name!r}")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1, path, "rank"))
            dims = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, path, "dims"))
            n_items = int(np.prod(dims, dtype=np.int64)) if rank else 1
            payload = _read_exact(fh, 4 * n_items, path, f"payload of {name!r}")
            arr = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(dims)
            out[name] = arr
    return out
