"""File formats: PGM images, IDX archives, point-cloud CSV/OBJ, rotation CSV."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .measures import PointCloud


class DataError(ValueError):
    """Malformed or missing input data."""


# --- PGM ----------------------------------------------------------------------


def write_pgm(path, pixels, maxval: int = 65535) -> float:
    """Write a binary (P5) PGM, scaling to ``maxval``.  Returns the scale used.

    The scale is ``maxval / max(pixels)`` so the stored integers keep the
    relative gray values; readers renormalize anyway.
    """
    pixels = np.asarray(pixels, dtype=float)
    top = pixels.max()
    scale = maxval / top if top > 0 else 1.0
    q = np.rint(pixels * scale).astype(np.int64)
    dtype = ">u2" if maxval > 255 else "u1"
    H, W = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n{maxval}\n".encode("ascii"))
        fh.write(q.astype(dtype).tobytes())
    return scale


def _pgm_tokens(data: bytes, count: int, pos: int):
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def read_pgm(path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) PGM as a float array."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise DataError(f"{path}: not a PGM file")
    (w, h, mx), pos = _pgm_tokens(data, 3, 2)
    try:
        W, H, maxval = int(w), int(h), int(mx)
    except ValueError:
        raise DataError(f"{path}: bad PGM header") from None
    if magic == b"P2":
        vals = data[pos:].split()
        if len(vals) < W * H:
            raise DataError(f"{path}: truncated PGM data")
        arr = np.array([int(v) for v in vals[:W * H]], dtype=float)
    else:
        pos += 1
        dtype = ">u2" if maxval > 255 else "u1"
        size = W * H * np.dtype(dtype).itemsize
        if len(data) - pos < size:
            raise DataError(f"{path}: truncated PGM data")
        arr = np.frombuffer(data[pos:pos + size], dtype=dtype).astype(float)
    return arr.reshape(H, W)


# --- IDX ----------------------------------------------------------------------

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


def _open_maybe_gzip(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    raw = path.read_bytes()
    return gzip.decompress(raw) if raw[:2] == b"\x1f\x8b" else raw


def read_idx(path, expected_magic: int | None = None) -> np.ndarray:
    """Read an unsigned-byte IDX file (big-endian header)."""
    data = _open_maybe_gzip(path)
    if len(data) < 4:
        raise DataError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if expected_magic is not None and magic != expected_magic:
        raise DataError(f"{path}: bad magic number 0x{magic:08x}, expected 0x{expected_magic:08x}")
    if magic >> 8 != 0x08:
        raise DataError(f"{path}: unsupported IDX type 0x{magic:08x}")
    ndim = magic & 0xFF
    if len(data) < 4 + 4 * ndim:
        raise DataError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:4 + 4 * ndim])
    count = int(np.prod(dims))
    body = data[4 + 4 * ndim:]
    if len(body) < count:
        raise DataError(f"{path}: truncated IDX data ({len(body)} of {count} bytes)")
    return np.frombuffer(body[:count], dtype=np.uint8).reshape(dims)


def write_idx(path, array) -> None:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ValueError("only unsigned-byte IDX files are supported")
    header = struct.pack(">I", 0x0800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + array.tobytes())


# --- point clouds -------------------------------------------------------------


def _parse_floats(fields, path, lineno):
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise DataError(f"{path}:{lineno}: cannot parse {' '.join(fields)!r}") from None


def load_pointcloud(path) -> PointCloud:
    """Vertices of a CSV (one point per line) or OBJ file, weighted uniformly."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    pts = []
    obj = path.suffix.lower() == ".obj"
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if obj:
            parts = s.split()
            if parts[0] != "v":
                continue
            pts.append(_parse_floats(parts[1:4], path, lineno))
        else:
            pts.append(_parse_floats(s.split(","), path, lineno))
    if not pts:
        raise DataError(f"{path}: no vertices")
    if len({len(p) for p in pts}) != 1:
        raise DataError(f"{path}: rows have differing lengths")
    return PointCloud(np.array(pts))


def write_pointcloud_csv(path, cloud: PointCloud) -> None:
    """One point per line; rotation clouds are written as 9 row-major entries."""
    flat = cloud.points.reshape(len(cloud), -1)
    Path(path).write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in flat))


def load_rotations_csv(path) -> PointCloud:
    """Rotation cloud stored as 9 comma-separated row-major entries per line."""
    cloud = load_pointcloud(path)
    if cloud.points.shape[1] != 9:
        raise DataError(f"{path}: expected 9 entries per rotation")
    try:
        return PointCloud(cloud.points.reshape(-1, 3, 3))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
