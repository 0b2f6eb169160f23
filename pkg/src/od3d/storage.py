"""Binary persistence for ODTensor.

Layout (all integers little-endian)::

    magic   b"OD3D"
    u16     version (1)
    u16     category (0 = unspecified, 1 = specified)
    u32     year
    u32     n_ics
    u32     n_days
    u64[n_days]   absolute byte offset of each day slab
    per day:  u64 nnz, then nnz x (u32 i, u32 j, u32 count) sorted by (i, j)
    u64     total count
    u32     CRC-32 of every preceding byte
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    TensorFormatError,
    TruncatedFileError,
    VersionMismatchError,
)
from .model import TimeCategory
from .tensor import ODTensor, days_in_year

MAGIC = b"OD3D"
VERSION = 1

_HEADER = struct.Struct("<4sHHIII")
_FOOTER = struct.Struct("<QI")
_TRIPLET = np.dtype([("i", "<u4"), ("j", "<u4"), ("c", "<u4")])


@dataclass(frozen=True)
class TensorFileHeader:
    version: int
    category: TimeCategory
    year: int
    n_ics: int
    n_days: int
    offsets: tuple[int, ...]
    total: int
    nnz: int
    file_size: int

    def as_rows(self) -> list[tuple[str, object]]:
        return [
            ("version", self.version),
            ("year", self.year),
            ("category", self.category.label),
            ("n_ics", self.n_ics),
            ("n_days", self.n_days),
            ("nnz", self.nnz),
            ("total", self.total),
            ("file_bytes", self.file_size),
        ]


def encode(tensor: ODTensor) -> bytes:
    n_days = tensor.n_days
    table_start = _HEADER.size
    slab_start = table_start + 8 * n_days
    nnz_per_day = np.diff(tensor.day_ptr).astype(np.uint64)
    slab_sizes = 8 + 12 * nnz_per_day
    offsets = slab_start + np.concatenate([[0], np.cumsum(slab_sizes)[:-1]]).astype(np.uint64)

    triplets = np.empty(tensor.nnz, dtype=_TRIPLET)
    triplets["i"] = tensor.origin
    triplets["j"] = tensor.dest
    triplets["c"] = tensor.count

    parts = [
        _HEADER.pack(MAGIC, VERSION, int(tensor.category), tensor.year, tensor.n_ics, n_days),
        offsets.astype("<u8").tobytes(),
    ]
    ptr = tensor.day_ptr
    for t in range(n_days):
        parts.append(struct.pack("<Q", int(nnz_per_day[t])))
        parts.append(triplets[ptr[t]:ptr[t + 1]].tobytes())
    parts.append(struct.pack("<Q", tensor.total))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save(tensor: ODTensor, path: str | os.PathLike) -> int:
    """Write ``tensor`` to ``path``; returns the number of bytes written."""
    data = encode(tensor)
    Path(path).write_bytes(data)
    return len(data)


def _u64(data: bytes, pos: int) -> int:
    return struct.unpack_from("<Q", data, pos)[0]


def _consistent_full_length(data: bytes, n_days: int) -> bool:
    """Whether ``data`` could be a complete file whose only defect is corruption.

    A truncated file and a corrupted one both fail the CRC.  A single damaged
    byte can break at most one of three independent length witnesses (slab
    walk, offset table + last nnz, offset table + footer total), so if any
    witness agrees with the actual length the file is not short.
    """
    size = len(data)
    table = _HEADER.size
    slab_start = table + 8 * n_days
    if slab_start + _FOOTER.size > size:
        return False

    # witness 1: walk slabs by their nnz fields
    pos = slab_start
    for _ in range(n_days):
        if pos + 8 > size:
            pos = -1
            break
        pos += 8 + 12 * _u64(data, pos)
    if pos + _FOOTER.size == size:
        return True

    offsets = np.frombuffer(data, dtype="<u8", count=n_days, offset=table).astype(np.int64)
    last = int(offsets[-1]) if n_days else slab_start
    # witness 2: offset table plus the last slab's nnz
    if 0 <= last and last + 8 <= size and last + 8 + 12 * _u64(data, last) + _FOOTER.size == size:
        return True

    # witness 3: infer the last slab's length from the file size, then check
    # the footer total against the counts that layout implies
    tail = size - _FOOTER.size - last - 8
    if last < slab_start or tail < 0 or tail % 12:
        return False
    ends = np.append(offsets[1:], last + 8 + tail)
    if offsets[0] != slab_start or np.any(ends > size - _FOOTER.size):
        return False
    if np.any(ends - offsets < 8) or np.any((ends - offsets - 8) % 12):
        return False
    total = 0
    for start, end in zip(offsets, ends):
        block = np.frombuffer(data, dtype=_TRIPLET, count=int(end - start - 8) // 12, offset=int(start) + 8)
        total += int(block["c"].sum(dtype=np.int64))
    return total == _u64(data, size - _FOOTER.size)


def _check(data: bytes) -> tuple:
    if len(data) < _HEADER.size:
        if len(data) >= 4 and data[:4] != MAGIC:
            raise BadMagicError(f"bad magic {data[:4]!r}")
        raise TruncatedFileError(f"file is {len(data)} bytes, shorter than the header")
    magic, version, category, year, n_ics, n_days = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatchError(f"format version {version}, expected {VERSION}")
    stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        candidates = {n_days}
        if 1 <= year <= 9999:
            candidates.add(days_in_year(year))
        if any(n < 1000 and _consistent_full_length(data, n) for n in candidates):
            raise ChecksumError("CRC-32 mismatch: file contents are corrupted")
        raise TruncatedFileError(f"file of {len(data)} bytes is shorter than its layout requires")
    return category, year, n_ics, n_days


def _parse(data: bytes) -> tuple[TensorFileHeader, np.ndarray, np.ndarray]:
    category, year, n_ics, n_days = _check(data)
    try:
        cat = TimeCategory(category)
    except ValueError:
        raise TensorFormatError(f"unknown category code {category}") from None
    if n_days != days_in_year(year):
        raise TensorFormatError(f"n_days {n_days} inconsistent with year {year}")
    table = _HEADER.size
    offsets = np.frombuffer(data, dtype="<u8", count=n_days, offset=table).astype(np.int64)
    expected = table + 8 * n_days
    nnz_per_day = np.empty(n_days, dtype=np.int64)
    for t in range(n_days):
        if offsets[t] != expected:
            raise TensorFormatError(f"slab {t} offset {offsets[t]} != expected {expected}")
        nnz_per_day[t] = _u64(data, expected)
        expected += 8 + 12 * int(nnz_per_day[t])
    if expected + _FOOTER.size != len(data):
        raise TensorFormatError("slab layout does not match file size")
    total = _u64(data, expected)
    header = TensorFileHeader(VERSION, cat, year, n_ics, n_days, tuple(int(o) for o in offsets),
                              total, int(nnz_per_day.sum()), len(data))
    return header, offsets, nnz_per_day


def read_header(path: str | os.PathLike) -> TensorFileHeader:
    """Validate a tensor file and return its metadata without building arrays."""
    return _parse(Path(path).read_bytes())[0]


def decode(data: bytes) -> ODTensor:
    header, offsets, nnz_per_day = _parse(data)
    blocks = [
        np.frombuffer(data, dtype=_TRIPLET, count=int(n), offset=int(off) + 8)
        for off, n in zip(offsets, nnz_per_day)
    ]
    trip = np.concatenate(blocks) if blocks else np.empty(0, dtype=_TRIPLET)
    day_ptr = np.concatenate([[0], np.cumsum(nnz_per_day)]).astype(np.int64)
    origin = trip["i"].astype(np.uint32)
    dest = trip["j"].astype(np.uint32)
    count = trip["c"].astype(np.uint32)
    if len(trip):
        if max(origin.max(), dest.max()) >= header.n_ics:
            raise TensorFormatError("IC index exceeds n_ics")
        if np.any(count == 0):
            raise TensorFormatError("zero count stored in a slab")
        day = np.repeat(np.arange(header.n_days), nnz_per_day)
        key = (day * header.n_ics + origin.astype(np.int64)) * header.n_ics + dest
        if np.any(np.diff(key) <= 0):
            raise TensorFormatError("slab coordinates are not strictly (i, j)-sorted")
    tensor = ODTensor(header.year, header.category, header.n_ics, day_ptr, origin, dest, count)
    if tensor.total != header.total:
        raise TensorFormatError(f"footer total {header.total} != sum of counts {tensor.total}")
    return tensor


def load(path: str | os.PathLike) -> ODTensor:
    """Read a tensor file written by :func:`save`.

    Raises one of BadMagicError, VersionMismatchError, TruncatedFileError or
    ChecksumError (all TensorFormatError subclasses) on a damaged file.
    """
    return decode(Path(path).read_bytes())


def tensor_filename(year: int, category: TimeCategory) -> str:
    return f"od_{year}_{TimeCategory(category).label}.od3d"
