"""Per-year origin x destination x day count tensors.

Counts are held as per-day sparse slabs: coordinate arrays sorted by
(day, origin, destination) plus a ``day_ptr`` offset array, so slab ``t`` is
``origin[day_ptr[t]:day_ptr[t+1]]`` etc.  A dense 2728 x 2728 x 365 uint32
array would need ~10.9 GB; the slabs only store nonzero cells.
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass, field
from datetime import date, datetime
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import CountOverflowError, MetadataMismatchError, UnknownICError
from .model import ICRegistry, SearchRecord, TimeCategory, classify, effective_timestamp

COUNT_MAX = np.iinfo(np.uint32).max
OUT_OF_YEAR = None


def days_in_year(year: int) -> int:
    return 366 if calendar.isleap(year) else 365


def day_index(timestamp: datetime | date, year: int) -> int | None:
    """Whole days elapsed since January 1 of ``year``; None if outside that year."""
    if timestamp.year != year:
        return OUT_OF_YEAR
    return timestamp.timetuple().tm_yday - 1


def date_of(year: int, t: int) -> date:
    return date.fromordinal(date(year, 1, 1).toordinal() + t)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ODTensor:
    year: int
    category: TimeCategory
    n_ics: int
    day_ptr: np.ndarray = field(repr=False)
    origin: np.ndarray = field(repr=False)
    dest: np.ndarray = field(repr=False)
    count: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.day_ptr) != days_in_year(self.year) + 1:
            raise MetadataMismatchError(
                f"day_ptr length {len(self.day_ptr)} does not match year {self.year}"
            )
        if not (len(self.origin) == len(self.dest) == len(self.count) == self.day_ptr[-1]):
            raise MetadataMismatchError("coordinate arrays disagree in length")
        for name in ("day_ptr", "origin", "dest", "count"):
            arr = getattr(self, name)
            if arr.flags.writeable:
                _readonly(arr)

    # -- construction ---------------------------------------------------

    @classmethod
    def zeros(cls, year: int, category: TimeCategory, n_ics: int) -> "ODTensor":
        empty = np.zeros(0, dtype=np.uint32)
        return cls(year, TimeCategory(category), n_ics,
                   np.zeros(days_in_year(year) + 1, dtype=np.int64),
                   empty, empty.copy(), empty.copy())

    @classmethod
    def from_coords(
        cls,
        year: int,
        category: TimeCategory,
        n_ics: int,
        day,
        origin,
        dest,
        count=None,
    ) -> "ODTensor":
        """Build from (possibly repeated, unordered) coordinates.

        Duplicate coordinates are summed and zero cells dropped.  ``count``
        defaults to one per coordinate.
        """
        n_days = days_in_year(year)
        day = np.asarray(day, dtype=np.int64)
        origin = np.asarray(origin, dtype=np.int64)
        dest = np.asarray(dest, dtype=np.int64)
        if count is None:
            count = np.ones(len(day), dtype=np.int64)
        count = np.asarray(count, dtype=np.int64)
        if len(day):
            if day.min() < 0 or day.max() >= n_days:
                raise IndexError(f"day index out of range [0, {n_days})")
            lo = min(origin.min(), dest.min())
            hi = max(origin.max(), dest.max())
            if lo < 0 or hi >= n_ics:
                raise IndexError(f"IC index out of range [0, {n_ics})")
            if count.min() < 0:
                raise ValueError("counts must be non-negative")
        key = (day * n_ics + origin) * n_ics + dest
        uniq, inverse = np.unique(key, return_inverse=True)
        summed = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(summed, inverse, count)
        keep = summed > 0
        uniq, summed = uniq[keep], summed[keep]
        if len(summed) and summed.max() > COUNT_MAX:
            raise CountOverflowError(
                f"cell count {int(summed.max())} exceeds 32-bit limit"
            )
        u_day, rem = np.divmod(uniq, n_ics * n_ics)
        u_org, u_dst = np.divmod(rem, n_ics)
        day_ptr = np.searchsorted(u_day, np.arange(n_days + 1), side="left").astype(np.int64)
        return cls(year, TimeCategory(category), n_ics, day_ptr,
                   u_org.astype(np.uint32), u_dst.astype(np.uint32), summed.astype(np.uint32))

    @classmethod
    def from_dense(cls, year: int, category: TimeCategory, dense: np.ndarray) -> "ODTensor":
        dense = np.asarray(dense)
        n = dense.shape[0]
        if dense.shape != (n, n, days_in_year(year)):
            raise MetadataMismatchError(f"dense shape {dense.shape} invalid for year {year}")
        i, j, t = np.nonzero(dense)
        return cls.from_coords(year, category, n, t, i, j, dense[i, j, t])

    # -- views ----------------------------------------------------------

    @property
    def n_days(self) -> int:
        return len(self.day_ptr) - 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_ics, self.n_ics, self.n_days)

    @property
    def nnz(self) -> int:
        return int(self.day_ptr[-1])

    @cached_property
    def day(self) -> np.ndarray:
        """Day index of every stored cell (parallel to ``origin``/``dest``)."""
        return _readonly(np.repeat(np.arange(self.n_days, dtype=np.int64), np.diff(self.day_ptr)))

    @cached_property
    def total(self) -> int:
        return int(self.count.sum(dtype=np.int64))

    def slab(self, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = self.day_ptr[t], self.day_ptr[t + 1]
        return self.origin[lo:hi], self.dest[lo:hi], self.count[lo:hi]

    def day_matrix(self, t: int) -> np.ndarray:
        if not 0 <= t < self.n_days:
            raise IndexError(f"day {t} out of range [0, {self.n_days})")
        out = np.zeros((self.n_ics, self.n_ics), dtype=np.int64)
        i, j, c = self.slab(t)
        out[i, j] = c
        return out

    def dense(self) -> np.ndarray:
        """Materialize the full (origin, destination, day) array; small tensors only."""
        out = np.zeros(self.shape, dtype=np.uint32)
        out[self.origin, self.dest, self.day] = self.count
        return out

    def same_frame(self, other: "ODTensor") -> bool:
        return (self.year, self.category, self.n_ics) == (other.year, other.category, other.n_ics)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ODTensor):
            return NotImplemented
        return (
            self.same_frame(other)
            and np.array_equal(self.day_ptr, other.day_ptr)
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.dest, other.dest)
            and np.array_equal(self.count, other.count)
        )

    __hash__ = None  # type: ignore[assignment]


def merge(a: ODTensor, b: ODTensor) -> ODTensor:
    """Elementwise sum of two tensors sharing year, category and IC count."""
    if not a.same_frame(b):
        raise MetadataMismatchError(
            f"cannot merge tensors ({a.year}, {a.category.label}, {a.n_ics}) "
            f"and ({b.year}, {b.category.label}, {b.n_ics})"
        )
    return ODTensor.from_coords(
        a.year, a.category, a.n_ics,
        np.concatenate([a.day, b.day]),
        np.concatenate([a.origin, b.origin]),
        np.concatenate([a.dest, b.dest]),
        np.concatenate([a.count.astype(np.int64), b.count.astype(np.int64)]),
    )


def merge_all(tensors: Sequence[ODTensor]) -> ODTensor:
    if not tensors:
        raise ValueError("nothing to merge")
    first = tensors[0]
    for t in tensors[1:]:
        if not first.same_frame(t):
            raise MetadataMismatchError("tensors disagree on year, category or IC count")
    return ODTensor.from_coords(
        first.year, first.category, first.n_ics,
        np.concatenate([t.day for t in tensors]),
        np.concatenate([t.origin for t in tensors]),
        np.concatenate([t.dest for t in tensors]),
        np.concatenate([t.count.astype(np.int64) for t in tensors]),
    )


# -- building ---------------------------------------------------------------


@dataclass
class IngestStats:
    """Accounting for one build pass.

    For either category ``c``:
    ``read == accepted[c] + skipped + out_of_year[c] + other_category(c)``.
    """

    read: int = 0
    accepted: dict = field(default_factory=lambda: {c: 0 for c in TimeCategory})
    out_of_year: dict = field(default_factory=lambda: {c: 0 for c in TimeCategory})
    unknown_ic: int = 0
    malformed: int = 0
    unknown_ids: set = field(default_factory=set, repr=False)

    @property
    def skipped(self) -> int:
        return self.unknown_ic + self.malformed

    def other_category(self, category: TimeCategory) -> int:
        other = TimeCategory(1 - int(category))
        return self.accepted[other] + self.out_of_year[other]

    def reconciles(self) -> bool:
        return all(
            self.read == self.accepted[c] + self.skipped + self.out_of_year[c] + self.other_category(c)
            for c in TimeCategory
        )

    def add_malformed(self, n: int) -> None:
        self.malformed += n
        self.read += n

    def combine(self, other: "IngestStats") -> "IngestStats":
        out = IngestStats(
            read=self.read + other.read,
            unknown_ic=self.unknown_ic + other.unknown_ic,
            malformed=self.malformed + other.malformed,
            unknown_ids=self.unknown_ids | other.unknown_ids,
        )
        for c in TimeCategory:
            out.accepted[c] = self.accepted[c] + other.accepted[c]
            out.out_of_year[c] = self.out_of_year[c] + other.out_of_year[c]
        return out

    def as_rows(self) -> list[tuple[str, int]]:
        return [
            ("records_read", self.read),
            ("accepted_specified", self.accepted[TimeCategory.SPECIFIED]),
            ("accepted_unspecified", self.accepted[TimeCategory.UNSPECIFIED]),
            ("skipped_unknown_ic", self.unknown_ic),
            ("skipped_malformed", self.malformed),
            ("out_of_year_specified", self.out_of_year[TimeCategory.SPECIFIED]),
            ("out_of_year_unspecified", self.out_of_year[TimeCategory.UNSPECIFIED]),
        ]


def build_tensors(
    records: Iterable[SearchRecord],
    registry: ICRegistry,
    year: int,
    *,
    skip_unknown: bool = False,
) -> tuple[dict[TimeCategory, ODTensor], IngestStats]:
    """Fold a record stream into one tensor per time category in a single pass.

    Raises:
        UnknownICError: if any record names an IC absent from ``registry`` and
            ``skip_unknown`` is false.  The whole stream is scanned first so the
            error reports how many references failed.
        CountOverflowError: if a cell would exceed the 32-bit count range.
    """
    stats = IngestStats()
    index_of = registry.index_of
    jan1 = date(year, 1, 1).toordinal()
    coords = {c: ([], [], []) for c in TimeCategory}
    for rec in records:
        stats.read += 1
        i = index_of.get(rec.departure_ic_id)
        j = index_of.get(rec.arrival_ic_id)
        if i is None or j is None:
            stats.unknown_ic += 1
            if i is None:
                stats.unknown_ids.add(rec.departure_ic_id)
            if j is None:
                stats.unknown_ids.add(rec.arrival_ic_id)
            continue
        cat = classify(rec)
        ts = effective_timestamp(rec, cat)
        if ts.year != year:
            stats.out_of_year[cat] += 1
            continue
        days, orgs, dsts = coords[cat]
        days.append(ts.toordinal() - jan1)
        orgs.append(i)
        dsts.append(j)
        stats.accepted[cat] += 1
    if stats.unknown_ic and not skip_unknown:
        raise UnknownICError(stats.unknown_ids, count=stats.unknown_ic)
    n = len(registry)
    tensors = {
        c: ODTensor.from_coords(year, c, n, *coords[c]) if coords[c][0] else ODTensor.zeros(year, c, n)
        for c in TimeCategory
    }
    return tensors, stats


def build_od_tensor(
    records: Iterable[SearchRecord],
    registry: ICRegistry,
    year: int,
    category: TimeCategory,
    *,
    skip_unknown: bool = False,
) -> tuple[ODTensor, IngestStats]:
    tensors, stats = build_tensors(records, registry, year, skip_unknown=skip_unknown)
    return tensors[TimeCategory(category)], stats
