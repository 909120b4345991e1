import struct

import numpy as np
import pytest

from nanops import (FormatError, load_idx_images, load_index_runs, load_npy,
                    multi_max_pool, save_index_runs, save_npy, save_pgm,
                    tensor_from_parts)
from nanops.io import load_pgm
from nanops.pooling import PoolConfig


def test_npy_round_trip_bit_exact(tmp_path):
    data = np.array([1.5, -0.0, np.inf, -np.inf], dtype=np.float32)
    t = tensor_from_parts((1, 1, 2, 2), data)
    p = tmp_path / "t.npy"
    save_npy(t, p)
    back = load_npy(p)
    np.testing.assert_array_equal(t.view(np.uint32), back.view(np.uint32))


def test_npy_preserves_nan_payload(tmp_path):
    bits = np.array([0x7FC00001, 0x7FC00000, 0xFFC00123, 0], dtype=np.uint32)
    t = tensor_from_parts((1, 1, 2, 2), bits.view(np.float32))
    p = tmp_path / "payload.npy"
    save_npy(t, p)
    back = load_npy(p)
    np.testing.assert_array_equal(back.view(np.uint32).ravel(), bits)


def test_npy_rejects_float64(tmp_path):
    p = tmp_path / "d.npy"
    np.save(p, np.zeros((1, 1, 2, 2), dtype=np.float64))
    with pytest.raises(FormatError, match="dtype"):
        load_npy(p)


def test_npy_rejects_rank3(tmp_path):
    p = tmp_path / "r3.npy"
    np.save(p, np.zeros((2, 2, 2), dtype=np.float32))
    with pytest.raises(FormatError, match="shape"):
        load_npy(p)


def test_npy_rejects_fortran_order(tmp_path):
    p = tmp_path / "f.npy"
    np.save(p, np.asfortranarray(np.arange(24, dtype=np.float32).reshape(1, 2, 3, 4)))
    with pytest.raises(FormatError, match="fortran_order"):
        load_npy(p)


def _idx_bytes(images):
    n, h, w = images.shape
    return struct.pack(">IIII", 0x00000803, n, h, w) + images.tobytes()


def test_idx_loader(tmp_path):
    imgs = np.zeros((2, 3, 4), dtype=np.uint8)
    imgs[0, 0, 0] = 255
    imgs[1, 2, 3] = 128
    p = tmp_path / "imgs.idx"
    p.write_bytes(_idx_bytes(imgs))
    t = load_idx_images(p)
    assert t.shape == (2, 1, 3, 4)
    assert t[0, 0, 0, 0] == 1.0
    assert t[0, 0, 1, 1] == 0.0
    assert t[1, 0, 2, 3] == np.float32(128 / 255)


def test_idx_bad_magic(tmp_path):
    p = tmp_path / "bad.idx"
    p.write_bytes(struct.pack(">IIII", 0x00000801, 1, 2, 2) + b"\x00" * 4)
    with pytest.raises(FormatError, match="magic"):
        load_idx_images(p)


def test_index_runs_round_trip(tmp_path):
    x = tensor_from_parts((1, 2, 4, 4),
                          np.tile([3, 3, 1, 2], 8).astype(np.float32))
    sets = multi_max_pool(x, PoolConfig(k=2, s=2)).index_sets
    p = tmp_path / "sets.u32"
    save_index_runs(sets, p)
    back = load_index_runs(p)
    assert back.grid == sets.grid
    np.testing.assert_array_equal(back.offsets, sets.offsets)
    np.testing.assert_array_equal(back.indices, sets.indices)


def test_pgm_round_trip(tmp_path):
    bits = np.array([[0.0, 12.0], [24.0, 30.0]])
    p = tmp_path / "m.pgm"
    save_pgm(bits, p)
    img = load_pgm(p)
    np.testing.assert_array_equal(img, [[0, 120], [240, 255]])
