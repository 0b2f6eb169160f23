"""Record and registry types, log-line parsing and time-category classification.

A route-search log row carries four fields: when the search happened, the
departure and arrival interchanges, and an optional user-entered time.  Rows
whose entered time lies strictly after the search moment are forward-looking
("specified"); everything else is treated as an ordinary lookup.
"""

from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

from .errors import ParseError, RegistryError, UnknownICError

LOG_COLUMNS = ("search_time", "departure_ic", "arrival_ic", "specified_time")
REGISTRY_COLUMNS = ("ic_id", "name", "longitude", "latitude")

_DATETIME_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2})(?::(\d{2})(?:\.\d+)?)?$"
)


class TimeCategory(enum.IntEnum):
    # values double as the on-disk category code
    UNSPECIFIED = 0
    SPECIFIED = 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, text: str) -> "TimeCategory":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown time category {text!r}") from None


@dataclass(frozen=True)
class InterchangeRecord:
    ic_id: str
    name: str
    longitude: float
    latitude: float

    def __post_init__(self) -> None:
        if not self.ic_id:
            raise RegistryError("ic_id must be non-empty")
        if not -180.0 <= self.longitude <= 180.0:
            raise RegistryError(f"{self.ic_id}: longitude {self.longitude} out of range")
        if not -90.0 <= self.latitude <= 90.0:
            raise RegistryError(f"{self.ic_id}: latitude {self.latitude} out of range")


@dataclass(frozen=True)
class ICRegistry:
    """Interchanges in index order; ``index_of`` maps ic_id to its position."""

    entries: tuple[InterchangeRecord, ...]
    index_of: Mapping[str, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.ic_id for e in self.entries]

    def index(self, ic_id: str) -> int:
        try:
            return self.index_of[ic_id]
        except KeyError:
            raise UnknownICError([ic_id]) from None

    def resolve(self, ic_ids: Iterable[str]) -> list[int]:
        ids = list(ic_ids)
        missing = [i for i in ids if i not in self.index_of]
        if missing:
            raise UnknownICError(missing)
        return [self.index_of[i] for i in ids]


@dataclass(frozen=True)
class SearchRecord:
    search_time: datetime
    departure_ic_id: str
    arrival_ic_id: str
    specified_time: datetime | None = None


@dataclass(frozen=True)
class LogFormat:
    """Column layout of a log file.

    ``columns`` names the position of each of the four logical fields; the
    default matches ``search_time,departure_ic,arrival_ic,specified_time``.
    """

    delimiter: str = ","
    columns: tuple[str, ...] = LOG_COLUMNS

    def __post_init__(self) -> None:
        if sorted(self.columns) != sorted(LOG_COLUMNS):
            raise ValueError(f"columns must be a permutation of {LOG_COLUMNS}")


DEFAULT_FORMAT = LogFormat()


def parse_datetime(text: str) -> datetime:
    """Parse ``YYYY-MM-DDTHH:MM[:SS]``; seconds and fractions are dropped."""
    m = _DATETIME_RE.match(text)
    if m is None:
        raise ValueError(f"malformed datetime {text!r}")
    y, mo, d, h, mi = (int(g) for g in m.groups()[:5])
    return datetime(y, mo, d, h, mi)


def format_datetime(value: datetime) -> str:
    return f"{value.year:04d}-{value.month:02d}-{value.day:02d}T{value.hour:02d}:{value.minute:02d}"


def parse_fields(
    fields: Sequence[str], fmt: LogFormat = DEFAULT_FORMAT, line_no: int | None = None
) -> SearchRecord:
    if len(fields) != len(fmt.columns):
        raise ParseError(f"expected {len(fmt.columns)} columns, got {len(fields)}", line_no)
    row = dict(zip(fmt.columns, (f.strip() for f in fields)))
    try:
        search_time = parse_datetime(row["search_time"])
    except ValueError as exc:
        raise ParseError(f"search_time: {exc}", line_no) from None
    spec_text = row["specified_time"]
    specified_time = None
    if spec_text:
        try:
            specified_time = parse_datetime(spec_text)
        except ValueError as exc:
            raise ParseError(f"specified_time: {exc}", line_no) from None
    if not row["departure_ic"]:
        raise ParseError("empty departure IC", line_no)
    if not row["arrival_ic"]:
        raise ParseError("empty arrival IC", line_no)
    return SearchRecord(search_time, row["departure_ic"], row["arrival_ic"], specified_time)


def parse_record(
    line: str, fmt: LogFormat = DEFAULT_FORMAT, line_no: int | None = None
) -> SearchRecord:
    """Parse one log line.

    Raises:
        ParseError: on a wrong column count, malformed datetime or empty IC id.
            The error carries ``line_no`` and ``reason`` so callers can choose
            between skipping and aborting.
    """
    rows = list(csv.reader([line.rstrip("\r\n")], delimiter=fmt.delimiter))
    return parse_fields(rows[0] if rows else [], fmt, line_no)


def format_record(record: SearchRecord, fmt: LogFormat = DEFAULT_FORMAT) -> str:
    values = {
        "search_time": format_datetime(record.search_time),
        "departure_ic": record.departure_ic_id,
        "arrival_ic": record.arrival_ic_id,
        "specified_time": (
            format_datetime(record.specified_time) if record.specified_time is not None else ""
        ),
    }
    return fmt.delimiter.join(values[c] for c in fmt.columns)


def classify(record: SearchRecord) -> TimeCategory:
    if record.specified_time is not None and record.specified_time > record.search_time:
        return TimeCategory.SPECIFIED
    return TimeCategory.UNSPECIFIED


def effective_timestamp(record: SearchRecord, category: TimeCategory | None = None) -> datetime:
    """Time used to place the record on the day axis."""
    if category is None:
        category = classify(record)
    if category is TimeCategory.SPECIFIED:
        return record.specified_time
    return record.search_time


class LogReader:
    """Iterate ``SearchRecord`` objects from a log CSV.

    With ``skip_malformed`` the reader counts bad rows in ``malformed`` and
    carries on; otherwise the first ``ParseError`` propagates.
    """

    def __init__(
        self,
        source: TextIO | Iterable[str],
        *,
        header: bool = False,
        skip_malformed: bool = False,
        fmt: LogFormat = DEFAULT_FORMAT,
        first_line_no: int = 1,
    ) -> None:
        self.source = source
        self.header = header
        self.skip_malformed = skip_malformed
        self.fmt = fmt
        self.first_line_no = first_line_no
        self.rows_read = 0
        self.malformed = 0
        self.errors: list[ParseError] = []

    def __iter__(self) -> Iterator[SearchRecord]:
        reader = csv.reader(self.source, delimiter=self.fmt.delimiter)
        line_no = self.first_line_no - 1
        for fields in reader:
            line_no += 1
            if self.header and line_no == self.first_line_no:
                continue
            if not fields:
                continue
            self.rows_read += 1
            try:
                yield parse_fields(fields, self.fmt, line_no)
            except ParseError as exc:
                if not self.skip_malformed:
                    raise
                self.malformed += 1
                if len(self.errors) < 20:
                    self.errors.append(exc)


def write_log(records: Iterable[SearchRecord], fh: TextIO, *, header: bool = False,
              fmt: LogFormat = DEFAULT_FORMAT) -> int:
    n = 0
    if header:
        fh.write(fmt.delimiter.join(fmt.columns) + "\n")
    for rec in records:
        fh.write(format_record(rec, fmt) + "\n")
        n += 1
    return n


# -- registry -----------------------------------------------------------------


def _order_key(e: InterchangeRecord) -> tuple[float, float, str]:
    return (e.longitude, e.latitude, e.ic_id)


def build_registry(entries: Iterable[InterchangeRecord]) -> ICRegistry:
    """Assign indices 0..N-1 by ascending longitude, then latitude, then ic_id."""
    entries = list(entries)
    seen: set[str] = set()
    for e in entries:
        if e.ic_id in seen:
            raise RegistryError(f"duplicate ic_id {e.ic_id!r}")
        seen.add(e.ic_id)
    ordered = tuple(sorted(entries, key=_order_key))
    index_of = MappingProxyType({e.ic_id: k for k, e in enumerate(ordered)})
    return ICRegistry(ordered, index_of)


def read_registry(source: str | Path | TextIO) -> ICRegistry:
    """Load an ``ic_id,name,longitude,latitude`` CSV; a header row is optional."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_registry(fh)
    entries = []
    for n, row in enumerate(csv.reader(source), start=1):
        if not row:
            continue
        if n == 1 and row[0].strip() == "ic_id":
            continue
        if len(row) != 4:
            raise RegistryError(f"registry line {n}: expected 4 columns, got {len(row)}")
        ic_id, name, lon, lat = (c.strip() for c in row)
        try:
            entries.append(InterchangeRecord(ic_id, name, float(lon), float(lat)))
        except ValueError as exc:
            raise RegistryError(f"registry line {n}: {exc}") from None
    return build_registry(entries)


def write_registry(registry: ICRegistry | Iterable[InterchangeRecord], fh: TextIO) -> None:
    entries = registry.entries if isinstance(registry, ICRegistry) else registry
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REGISTRY_COLUMNS)
    for e in entries:
        w.writerow([e.ic_id, e.name, repr(float(e.longitude)), repr(float(e.latitude))])


def registry_csv(registry: ICRegistry | Iterable[InterchangeRecord]) -> str:
    buf = io.StringIO()
    write_registry(registry, buf)
    return buf.getvalue()
