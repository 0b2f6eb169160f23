from __future__ import annotations

import struct
import zlib

import numpy as np
import pytest

from od3d import storage
from od3d.errors import (
    BadMagicError,
    ChecksumError,
    TensorFormatError,
    TruncatedFileError,
    VersionMismatchError,
)
from od3d.model import TimeCategory
from od3d.tensor import ODTensor

from helpers import random_cells, tensor_from_cells


def _sample(seed=0, n=12, year=2023, nnz=300, category=TimeCategory.SPECIFIED):
    rng = np.random.default_rng(seed)
    return tensor_from_cells(random_cells(rng, n, year, nnz=nnz), n, year, category)


def test_zero_tensor_round_trip_is_small(tmp_path):
    t = ODTensor.zeros(2023, TimeCategory.UNSPECIFIED, 50)
    n = storage.save(t, tmp_path / "z.od3d")
    assert storage.load(tmp_path / "z.od3d") == t
    dense_bytes = 50 * 50 * 365 * 4
    assert n < 0.01 * dense_bytes


def test_layout_is_exact():
    t = ODTensor.from_coords(2024, TimeCategory.SPECIFIED, 3, [0, 0, 2], [2, 0, 1], [1, 1, 1], [5, 7, 1])
    data = storage.encode(t)
    magic, version, cat, year, n_ics, n_days = struct.unpack_from("<4sHHIII", data, 0)
    assert (magic, version, cat, year, n_ics, n_days) == (b"OD3D", 1, 1, 2024, 3, 366)
    offsets = struct.unpack_from("<366Q", data, 20)
    slab0 = 20 + 8 * 366
    assert offsets[0] == slab0
    # day 0 holds two cells sorted by (i, j): (0, 1, 7) then (2, 1, 5)
    assert struct.unpack_from("<Q3I3I", data, slab0) == (2, 0, 1, 7, 2, 1, 5)
    assert offsets[1] == slab0 + 8 + 24
    assert struct.unpack_from("<Q", data, offsets[1])[0] == 0
    assert struct.unpack_from("<Q3I", data, offsets[2]) == (1, 1, 1, 1)
    assert all(b > a for a, b in zip(offsets, offsets[1:]))
    total, crc = struct.unpack_from("<QI", data, len(data) - 12)
    assert total == 13
    assert crc == zlib.crc32(data[:-4])
    assert len(data) == 20 + 8 * 366 + 8 * 366 + 12 * 3 + 12


def test_encode_is_deterministic():
    assert storage.encode(_sample(4)) == storage.encode(_sample(4))


@pytest.mark.parametrize("year", [2023, 2024])
def test_random_round_trip(tmp_path, year):
    t = _sample(seed=year, year=year, category=TimeCategory.UNSPECIFIED)
    storage.save(t, tmp_path / "t.od3d")
    back = storage.load(tmp_path / "t.od3d")
    assert back == t
    assert back.year == year and back.category is TimeCategory.UNSPECIFIED and back.n_ics == 12
    assert np.array_equal(back.dense(), t.dense())


def test_read_header(tmp_path):
    t = _sample(9)
    storage.save(t, tmp_path / "t.od3d")
    h = storage.read_header(tmp_path / "t.od3d")
    assert (h.year, h.category, h.n_ics, h.n_days, h.nnz, h.total) == (
        2023, TimeCategory.SPECIFIED, 12, 365, t.nnz, t.total)
    assert len(h.offsets) == 365


def test_bad_magic():
    data = bytearray(storage.encode(_sample()))
    data[0:4] = b"NOPE"
    with pytest.raises(BadMagicError):
        storage.decode(bytes(data))
    with pytest.raises(BadMagicError):
        storage.decode(b"i,j,count\n1,2,3\n" * 4)


def test_version_mismatch():
    data = bytearray(storage.encode(_sample()))
    data[4:6] = struct.pack("<H", 2)
    with pytest.raises(VersionMismatchError):
        storage.decode(bytes(data))


@pytest.mark.parametrize("keep", [0, 3, 10, 30, 1000, -13, -1])
def test_truncated(keep):
    data = storage.encode(_sample())
    cut = data[:keep] if keep >= 0 else data[:keep]
    with pytest.raises(TruncatedFileError):
        storage.decode(cut)


def test_truncation_is_never_reported_as_checksum():
    data = storage.encode(_sample(5, nnz=80))
    rng = np.random.default_rng(0)
    for cut in rng.integers(6, len(data), size=200):
        with pytest.raises(TruncatedFileError):
            storage.decode(data[:cut])


def test_corrupted_payload_byte():
    t = _sample()
    data = bytearray(storage.encode(t))
    pos = 20 + 8 * 365 + 8 + 5  # inside the first stored triplet
    if t.nnz == 0 or t.day_ptr[1] == 0:
        pos = len(data) - 20
    data[pos] ^= 0xFF
    with pytest.raises(ChecksumError):
        storage.decode(bytes(data))


@pytest.mark.parametrize("region", ["nnz_last", "offset_last", "n_days", "year", "footer_total"])
def test_corruption_of_length_fields_is_checksum(region):
    t = _sample(2, nnz=200)
    data = bytearray(storage.encode(t))
    offsets = struct.unpack_from("<365Q", data, 20)
    pos = {
        "nnz_last": offsets[-1] + 2,
        "offset_last": 20 + 8 * 364 + 1,
        "n_days": 16,
        "year": 12,
        "footer_total": len(data) - 12,
    }[region]
    data[pos] ^= 0x5A
    with pytest.raises(ChecksumError):
        storage.decode(bytes(data))


def test_valid_crc_but_inconsistent_layout():
    # a well-formed CRC over a structurally broken body is a format error
    data = bytearray(storage.encode(_sample()))
    data[16:20] = struct.pack("<I", 366)  # n_days wrong for 2023
    body = bytes(data[:-4])
    with pytest.raises(TensorFormatError):
        storage.decode(body + struct.pack("<I", zlib.crc32(body)))


def test_filename():
    assert storage.tensor_filename(2023, TimeCategory.SPECIFIED) == "od_2023_specified.od3d"
