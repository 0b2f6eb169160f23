"""Read-only spatiotemporal queries over ODTensor.

Day ranges are half-open ``[start, end)`` day indices.  ICs are addressed by
``ic_id`` at the API boundary and resolved through the registry.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import InvalidRangeError
from .model import ICRegistry, TimeCategory
from .tensor import ODTensor, date_of, day_index


@dataclass(frozen=True, eq=False)
class ODMatrix:
    n_ics: int
    values: np.ndarray = field(repr=False)
    year: int
    category: TimeCategory
    day_range: tuple[int, int]

    def nonzero_triplets(self) -> list[tuple[int, int, int]]:
        i, j = np.nonzero(self.values)
        return [(int(a), int(b), int(self.values[a, b])) for a, b in zip(i, j)]


@dataclass(frozen=True, eq=False)
class DaySeries:
    year: int
    day_range: tuple[int, int]
    values: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self) -> None:
        start, end = self.day_range
        if len(self.values) != end - start:
            raise ValueError(f"series length {len(self.values)} != range length {end - start}")

    @property
    def start(self) -> int:
        return self.day_range[0]

    @property
    def end(self) -> int:
        return self.day_range[1]

    def __len__(self) -> int:
        return len(self.values)

    def days(self) -> range:
        return range(self.start, self.end)

    def dates(self) -> list[date]:
        return [date_of(self.year, t) for t in self.days()]

    def total(self) -> int:
        return int(self.values.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DaySeries):
            return NotImplemented
        return (self.year, self.day_range) == (other.year, other.day_range) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None  # type: ignore[assignment]


def check_range(tensor: ODTensor, day_range: Sequence[int] | None) -> tuple[int, int]:
    if day_range is None:
        return 0, tensor.n_days
    start, end = (int(x) for x in day_range)
    if not 0 <= start <= end <= tensor.n_days:
        raise InvalidRangeError(f"day range [{start}, {end}) outside [0, {tensor.n_days}]")
    return start, end


def date_range(year: int, first: date, last: date) -> tuple[int, int]:
    """Inclusive calendar dates -> half-open day-index range within ``year``."""
    s, e = day_index(first, year), day_index(last, year)
    if s is None or e is None:
        raise InvalidRangeError(f"dates {first}..{last} are not both in {year}")
    if e < s:
        raise InvalidRangeError(f"range end {last} precedes start {first}")
    return s, e + 1


def _window(tensor: ODTensor, start: int, end: int) -> slice:
    return slice(int(tensor.day_ptr[start]), int(tensor.day_ptr[end]))


def total(tensor: ODTensor) -> int:
    return tensor.total


def aggregate_over_origin(tensor: ODTensor, day_range: Sequence[int] | None = None) -> np.ndarray:
    """Total searches into each destination, summed over origins and days."""
    start, end = check_range(tensor, day_range)
    w = _window(tensor, start, end)
    out = np.zeros(tensor.n_ics, dtype=np.int64)
    np.add.at(out, tensor.dest[w], tensor.count[w].astype(np.int64))
    return out


def aggregate_over_destination(tensor: ODTensor, day_range: Sequence[int] | None = None) -> np.ndarray:
    start, end = check_range(tensor, day_range)
    w = _window(tensor, start, end)
    out = np.zeros(tensor.n_ics, dtype=np.int64)
    np.add.at(out, tensor.origin[w], tensor.count[w].astype(np.int64))
    return out


def slice_time(tensor: ODTensor, start: int, end: int) -> ODMatrix:
    """OD matrix summed over days ``[start, end)``."""
    start, end = check_range(tensor, (start, end))
    w = _window(tensor, start, end)
    values = np.zeros((tensor.n_ics, tensor.n_ics), dtype=np.int64)
    np.add.at(values, (tensor.origin[w], tensor.dest[w]), tensor.count[w].astype(np.int64))
    return ODMatrix(tensor.n_ics, values, tensor.year, tensor.category, (start, end))


def destination_series(
    tensor: ODTensor,
    dest_ids: Iterable[str],
    day_range: Sequence[int] | None,
    registry: ICRegistry,
) -> DaySeries:
    dest_ids = list(dict.fromkeys(dest_ids))
    targets = registry.resolve(dest_ids)
    start, end = check_range(tensor, day_range)
    w = _window(tensor, start, end)
    mask = np.isin(tensor.dest[w], np.asarray(targets, dtype=np.uint32))
    values = np.zeros(end - start, dtype=np.int64)
    np.add.at(values, tensor.day[w][mask] - start, tensor.count[w][mask].astype(np.int64))
    label = f"dest={';'.join(dest_ids)} {tensor.category.label} {tensor.year}"
    return DaySeries(tensor.year, (start, end), values, label)


def top_k_origins(
    tensor: ODTensor,
    dest_id: str,
    day_range: Sequence[int] | None,
    k: int,
    registry: ICRegistry,
) -> list[tuple[str, int]]:
    """Origins with the most searches into ``dest_id``.

    Sorted by descending count, ties by ascending origin index; origins with
    no searches are left out.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    j = registry.index(dest_id)
    start, end = check_range(tensor, day_range)
    w = _window(tensor, start, end)
    hit = tensor.dest[w] == j
    per_origin = np.zeros(tensor.n_ics, dtype=np.int64)
    np.add.at(per_origin, tensor.origin[w][hit], tensor.count[w][hit].astype(np.int64))
    nz = np.flatnonzero(per_origin)
    order = nz[np.lexsort((nz, -per_origin[nz]))][:k]
    ids = registry.ids
    return [(ids[i], int(per_origin[i])) for i in order]


# -- CSV output ---------------------------------------------------------------


def _writer(fh: TextIO):
    return csv.writer(fh, lineterminator="\n")


def write_series_csv(series: DaySeries, fh: TextIO, *, header: bool = True) -> None:
    w = _writer(fh)
    if header:
        w.writerow(["day_index", "date", "count"])
    for t, d, v in zip(series.days(), series.dates(), series.values):
        w.writerow([t, d.isoformat(), int(v)])


def write_topk_csv(rows: Sequence[tuple[str, int]], fh: TextIO) -> None:
    w = _writer(fh)
    w.writerow(["rank", "origin_ic", "count"])
    for rank, (ic, c) in enumerate(rows, start=1):
        w.writerow([rank, ic, c])


def write_matrix_csv(matrix: ODMatrix, fh: TextIO) -> None:
    w = _writer(fh)
    w.writerow(["i", "j", "count"])
    w.writerows(matrix.nonzero_triplets())


def write_destination_totals_csv(totals: np.ndarray, registry: ICRegistry, fh: TextIO) -> None:
    w = _writer(fh)
    w.writerow(["dest_index", "dest_ic", "count"])
    for j, (ic, c) in enumerate(zip(registry.ids, totals)):
        w.writerow([j, ic, int(c)])
