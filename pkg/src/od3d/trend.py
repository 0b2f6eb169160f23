"""Monthly volumes, seasonal window series, peaks and year-over-year growth."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import WindowMismatchError
from .model import ICRegistry, TimeCategory
from .query import DaySeries, destination_series
from .tensor import ODTensor, date_of, day_index, days_in_year


@dataclass(frozen=True)
class SeasonWindow:
    """A labelled month-day window (inclusive both ends) over a set of destinations."""

    label: str
    start: tuple[int, int]
    end: tuple[int, int]
    dest_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"window {self.label!r}: start {self.start} after end {self.end}")
        for month, day in (self.start, self.end):
            date(2024, month, day)  # validates against a leap year

    def day_range(self, year: int) -> tuple[int, int]:
        first = date(year, *self.start)
        last = date(year, *self.end)
        return day_index(first, year), day_index(last, year) + 1

    def with_destinations(self, dest_ids: Iterable[str]) -> "SeasonWindow":
        return SeasonWindow(self.label, self.start, self.end, tuple(dest_ids))


@dataclass(frozen=True, eq=False)
class AnnotatedSeries:
    series: DaySeries
    is_weekend: np.ndarray = field(repr=False)
    is_holiday: np.ndarray = field(repr=False)
    window: str = ""

    def __post_init__(self) -> None:
        if not len(self.is_weekend) == len(self.is_holiday) == len(self.series):
            raise ValueError("flag vectors must match series length")

    @property
    def year(self) -> int:
        return self.series.year

    @property
    def values(self) -> np.ndarray:
        return self.series.values


def parse_mmdd(text: str) -> tuple[int, int]:
    text = text.strip().replace("-", "")
    if len(text) != 4 or not text.isdigit():
        raise ValueError(f"expected MMDD, got {text!r}")
    month, day = int(text[:2]), int(text[2:])
    date(2024, month, day)
    return month, day


def read_presets(source: str | Path | TextIO | None = None) -> dict[str, SeasonWindow]:
    """Load ``label,start_mmdd,end_mmdd,dest_ic_ids`` rows keyed by label.

    With no source the bundled presets (the three tourism seasons) are used.
    """
    if source is None:
        text = resources.files("od3d.data").joinpath("season_presets.csv").read_text("utf-8")
        return read_presets(text.splitlines())
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_presets(fh)
    out = {}
    for n, row in enumerate(csv.reader(source), start=1):
        if not row or row[0].startswith("#"):
            continue
        if n == 1 and row[0].strip() == "label":
            continue
        if len(row) != 4:
            raise ValueError(f"presets line {n}: expected 4 columns, got {len(row)}")
        label, start, end, ids = (c.strip() for c in row)
        dest = tuple(i for i in (s.strip() for s in ids.split(";")) if i)
        out[label] = SeasonWindow(label, parse_mmdd(start), parse_mmdd(end), dest)
    return out


def write_presets(windows: Iterable[SeasonWindow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["label", "start_mmdd", "end_mmdd", "dest_ic_ids"])
    for win in windows:
        w.writerow([win.label, "%02d%02d" % win.start, "%02d%02d" % win.end, ";".join(win.dest_ids)])


def read_holidays(source: str | Path | TextIO) -> set[date]:
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_holidays(fh)
    out = set()
    for row in csv.reader(source):
        if not row or not row[0].strip() or row[0].strip() == "date":
            continue
        out.add(date.fromisoformat(row[0].strip()))
    return out


# -- analytics ----------------------------------------------------------------


def month_boundaries(year: int) -> np.ndarray:
    """Day index of the first day of each month, plus the year length (13 entries)."""
    starts = [day_index(date(year, m, 1), year) for m in range(1, 13)]
    return np.array(starts + [days_in_year(year)], dtype=np.int64)


def monthly_totals(tensor: ODTensor) -> np.ndarray:
    bounds = month_boundaries(tensor.year)
    cum = np.concatenate([[0], np.cumsum(tensor.count, dtype=np.int64)])
    at = cum[tensor.day_ptr[bounds]]
    return np.diff(at)


def weekend_mask(year: int) -> np.ndarray:
    # date.weekday(): Monday=0 .. Sunday=6
    first = date(year, 1, 1).weekday()
    wd = (first + np.arange(days_in_year(year))) % 7
    return wd >= 5


def holiday_mask(year: int, holidays: Iterable[date] | None) -> np.ndarray:
    mask = np.zeros(days_in_year(year), dtype=bool)
    for d in holidays or ():
        if d.year == year:
            mask[day_index(d, year)] = True
    return mask


def season_series(
    tensors: Sequence[ODTensor],
    window: SeasonWindow,
    registry: ICRegistry,
    *,
    years: Sequence[int] | None = None,
    category: TimeCategory = TimeCategory.SPECIFIED,
    holidays: Iterable[date] | None = None,
) -> list[AnnotatedSeries]:
    """One annotated daily series per year over ``window``'s destinations.

    Only tensors of ``category`` are considered.  Raises KeyError if a year in
    ``years`` has no tensor, ValueError if a year has more than one.
    """
    by_year: dict[int, ODTensor] = {}
    for t in tensors:
        if t.category != category:
            continue
        if t.year in by_year:
            raise ValueError(f"more than one {category.label} tensor for {t.year}")
        by_year[t.year] = t
    if years is None:
        years = sorted(by_year)
    missing = [y for y in years if y not in by_year]
    if missing:
        raise KeyError(f"no {category.label} tensor for year(s) {missing}")
    holidays = set(holidays or ())
    out = []
    for y in years:
        s, e = window.day_range(y)
        series = destination_series(by_year[y], window.dest_ids, (s, e), registry)
        series = DaySeries(y, (s, e), series.values, f"{window.label} {y}")
        out.append(AnnotatedSeries(
            series, weekend_mask(y)[s:e], holiday_mask(y, holidays)[s:e], window.label
        ))
    return out


def peak_days(series: DaySeries | AnnotatedSeries, k: int = 1) -> list[tuple[int, int]]:
    """The ``k`` highest days as ``(day_index, count)``, ties to the earlier day."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(series, AnnotatedSeries):
        series = series.series
    values = np.asarray(series.values)
    idx = np.arange(len(values))
    order = np.lexsort((idx, -values))[:k]
    return [(series.start + int(i), int(values[i])) for i in order]


@dataclass(frozen=True)
class YearOverYear:
    years: tuple[int, ...]
    totals: tuple[int, ...]
    ratios: tuple[float, ...]  # totals[k+1] / totals[k]


def _endpoints(series: DaySeries) -> tuple[tuple[int, int], tuple[int, int]]:
    first = date_of(series.year, series.start)
    last = date_of(series.year, series.end - 1)
    return (first.month, first.day), (last.month, last.day)


def year_over_year(series_by_year: Mapping[int, DaySeries] | Sequence) -> YearOverYear:
    """Window totals per year and consecutive-year ratios.

    Series must cover the same month-day window; leap years may add a day.
    """
    if isinstance(series_by_year, Mapping):
        items = list(series_by_year.values())
    else:
        items = list(series_by_year)
    items = [s.series if isinstance(s, AnnotatedSeries) else s for s in items]
    if len(items) < 2:
        raise ValueError("need series for at least two years")
    items.sort(key=lambda s: s.year)
    ends = {_endpoints(s) for s in items if len(s)}
    if len(ends) > 1 or any(len(s) == 0 for s in items):
        raise WindowMismatchError(f"series cover different windows: {sorted(ends)}")
    totals = tuple(s.total() for s in items)
    ratios = tuple(
        (b / a) if a else float("nan") for a, b in zip(totals[:-1], totals[1:])
    )
    return YearOverYear(tuple(s.year for s in items), totals, ratios)


# -- CSV output ---------------------------------------------------------------


def write_monthly_csv(totals: Sequence[int], year: int, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["year", "month", "count"])
    for m, c in enumerate(totals, start=1):
        w.writerow([year, m, int(c)])


def write_annotated_csv(series: Sequence[AnnotatedSeries] | AnnotatedSeries, fh: TextIO) -> None:
    """Plot-ready ``date,count,is_weekend,is_holiday`` rows; one header for all years."""
    if isinstance(series, AnnotatedSeries):
        series = [series]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["date", "count", "is_weekend", "is_holiday"])
    for a in series:
        for d, v, we, ho in zip(a.series.dates(), a.values, a.is_weekend, a.is_holiday):
            w.writerow([d.isoformat(), int(v), int(we), int(ho)])


def write_yoy_csv(yoy: YearOverYear, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["year", "total", "ratio_to_previous"])
    prev = [""] + [f"{r:.6f}" for r in yoy.ratios]
    for y, t, r in zip(yoy.years, yoy.totals, prev):
        w.writerow([y, t, r])
