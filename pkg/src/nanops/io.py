"""File I/O: NPY tensors, IDX images, index-set sidecars, PGM heatmaps.

Supported NPY subset: version 1.0, little-endian float32, C order, exactly
4 dimensions. Round-trips are bit-exact, including NaN payloads and
infinities. Anything outside the subset raises :class:`FormatError` naming
the offending header field.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError
from .tensor import TENSOR_DTYPE, check_tensor4

_IDX_IMAGE_MAGIC = 0x00000803


def save_npy(tensor, path) -> None:
    """Write a 4D float32 tensor as NPY v1.0 (C order, little-endian)."""
    tensor = check_tensor4(tensor)
    np.save(path, np.ascontiguousarray(tensor))


def load_npy(path) -> np.ndarray:
    """Load an NPY file, enforcing the float32 / C-order / rank-4 subset."""
    arr = np.load(path, allow_pickle=False)
    if arr.dtype.str not in ("<f4", "=f4") or arr.dtype != np.float32:
        raise FormatError(f"{path}: unsupported dtype header field {arr.dtype.str!r}, "
                          "expected little-endian float32 ('<f4')")
    if arr.ndim != 4:
        raise FormatError(f"{path}: unsupported shape header field {arr.shape}, "
                          "expected 4 dimensions")
    if not arr.flags["C_CONTIGUOUS"]:
        raise FormatError(f"{path}: unsupported fortran_order header field (True), "
                          "expected C order")
    out = arr.astype(TENSOR_DTYPE, copy=False)
    out.setflags(write=False)
    return out


def load_idx_images(path) -> np.ndarray:
    """Load an IDX u8 image file as a ``(N, 1, H, W)`` tensor scaled to [0, 1].

    Pixels are divided by 255, so byte 255 maps to exactly 1.0.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated IDX header")
    magic, n, h, w = struct.unpack(">IIII", raw[:16])
    if magic != _IDX_IMAGE_MAGIC:
        raise FormatError(f"{path}: bad IDX magic 0x{magic:08x}, "
                          f"expected 0x{_IDX_IMAGE_MAGIC:08x}")
    expected = n * h * w
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
    if pixels.size != expected:
        raise FormatError(f"{path}: IDX payload has {pixels.size} bytes, "
                          f"expected {expected}")
    out = (pixels.astype(TENSOR_DTYPE) / np.float32(255.0)).reshape(n, 1, h, w)
    out.setflags(write=False)
    return out


def save_index_runs(index_sets, path) -> None:
    """Serialize pooled index sets as a flat little-endian u32 run file.

    Layout: ``N C OH OW`` grid dims, then for each cell in (n, c, oh, ow)
    scan order a run ``count idx0 ... idx{count-1}`` of flat plane indices.
    Debugging sidecar for NPY tensors; not consumed by any operator.
    """
    grid = index_sets.grid
    counts = np.diff(index_sets.offsets)
    cells = np.empty(index_sets.offsets.size - 1 + index_sets.indices.size,
                     dtype="<u4")
    pos = 0
    for i, c in enumerate(counts):
        cells[pos] = c
        lo, hi = index_sets.offsets[i], index_sets.offsets[i + 1]
        cells[pos + 1:pos + 1 + c] = index_sets.indices[lo:hi]
        pos += 1 + c
    with open(path, "wb") as f:
        f.write(np.asarray(grid, dtype="<u4").tobytes())
        f.write(cells[:pos].tobytes())


def load_index_runs(path):
    """Read a u32 run file written by :func:`save_index_runs`."""
    from .pooling import IndexSets

    raw = np.fromfile(path, dtype="<u4")
    if raw.size < 4:
        raise FormatError(f"{path}: truncated index run file")
    grid = tuple(int(v) for v in raw[:4])
    n_cells = grid[0] * grid[1] * grid[2] * grid[3]
    offsets = np.zeros(n_cells + 1, dtype=np.int64)
    indices = []
    pos = 4
    for i in range(n_cells):
        if pos >= raw.size:
            raise FormatError(f"{path}: run file ends inside cell {i}")
        c = int(raw[pos])
        indices.append(raw[pos + 1:pos + 1 + c].astype(np.int64))
        offsets[i + 1] = offsets[i] + c
        pos += 1 + c
    return IndexSets(grid=grid,
                     offsets=offsets,
                     indices=np.concatenate(indices) if indices else
                     np.empty(0, dtype=np.int64))


def save_pgm(image, path, scale: float = 10.0) -> None:
    """Write a 2D map as binary PGM (P5, 8-bit), values scaled by ``scale``.

    Used for significant-bit heatmaps: with the default scale, 24 bits maps
    to gray level 240.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"PGM image must be 2D, got ndim={img.ndim}")
    levels = np.clip(np.rint(img * scale), 0, 255).astype(np.uint8)
    h, w = levels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(levels.tobytes())


def load_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM written by :func:`save_pgm` (raw gray levels)."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    w, h = (int(t) for t in parts[1].split())
    if parts[2] != b"255":
        raise FormatError(f"{path}: unsupported PGM maxval {parts[2]!r}")
    data = np.frombuffer(parts[3], dtype=np.uint8, count=h * w)
    return data.reshape(h, w)
