from __future__ import annotations

import io
from collections import Counter
from datetime import date, datetime

import numpy as np
import pytest

from od3d import trend
from od3d.errors import WindowMismatchError
from od3d.model import InterchangeRecord, LogReader, TimeCategory, build_registry
from od3d.query import DaySeries, destination_series
from od3d.tensor import ODTensor, build_tensors

import oracles
from helpers import random_cells, tensor_from_cells

S, U = TimeCategory.SPECIFIED, TimeCategory.UNSPECIFIED


def _registry(n):
    return build_registry(InterchangeRecord(f"IC{k:03d}", "", 130.0 + k * 0.01, 35.0) for k in range(n))


def test_monthly_zero():
    assert trend.monthly_totals(ODTensor.zeros(2023, S, 4)).tolist() == [0] * 12


def test_monthly_day_zero_is_january():
    t = ODTensor.from_coords(2023, S, 4, [0], [1], [2], [9])
    assert trend.monthly_totals(t).tolist() == [9] + [0] * 11


@pytest.mark.parametrize("year", [2023, 2024])
def test_monthly_matches_calendar_buckets(year):
    rng = np.random.default_rng(year)
    cells = random_cells(rng, 6, year, nnz=500)
    t = tensor_from_cells(cells, 6, year)
    days = oracles.calendar_days(year)
    expected = Counter()
    for (_, _, d), c in cells.items():
        expected[days[d].month] += c
    got = trend.monthly_totals(t)
    assert got.tolist() == [expected[m] for m in range(1, 13)]
    assert got.sum() == t.total


def test_monthly_on_corpus(desk_corpus):
    config, text, _, registry = desk_corpus
    year = config.years[0]
    tensors, stats = build_tensors(LogReader(io.StringIO(text), header=True), registry, year)
    per_month = Counter()
    for line in text.splitlines()[1:]:
        search, _, _, spec = line.split(",")
        s = datetime.strptime(search, "%Y-%m-%dT%H:%M")
        p = datetime.strptime(spec, "%Y-%m-%dT%H:%M") if spec else None
        when = p if (p is not None and p > s) else s
        if when.year == year:
            per_month[when.month] += 1
    combined = trend.monthly_totals(tensors[S]) + trend.monthly_totals(tensors[U])
    assert combined.tolist() == [per_month[m] for m in range(1, 13)]
    assert combined.sum() == stats.accepted[S] + stats.accepted[U]


# -- weekend mask -------------------------------------------------------------


def test_weekend_mask_anchors():
    assert trend.weekend_mask(2023)[0]  # Sunday
    assert not trend.weekend_mask(2024)[0]  # Monday


@pytest.mark.parametrize("year", [2021, 2022, 2023, 2024])
def test_weekend_mask_vs_calendar(year):
    mask = trend.weekend_mask(year)
    days = oracles.calendar_days(year)
    assert len(mask) == len(days)
    assert mask.tolist() == [d.weekday() >= 5 for d in days]
    runs, run = [], 0
    for m in mask:
        run = run + 1 if m else 0
        runs.append(run)
    assert max(runs) == 2


# -- windows and season series --------------------------------------------------


def test_window_day_range():
    w = trend.SeasonWindow("nemophila", (3, 15), (5, 30))
    s, e = w.day_range(2023)
    days = oracles.calendar_days(2023)
    inside = [d for d in days if date(2023, 3, 15) <= d <= date(2023, 5, 30)]
    assert e - s == len(inside) == 77
    assert w.day_range(2024) == (s + 1, e + 1)


def test_window_rejects_reversed():
    with pytest.raises(ValueError):
        trend.SeasonWindow("x", (5, 1), (4, 1))


def test_bundled_presets():
    presets = trend.read_presets()
    assert set(presets) == {"nemophila", "autumn_foliage", "ski"}
    assert presets["nemophila"].start == (3, 15) and presets["nemophila"].end == (5, 30)
    assert presets["autumn_foliage"].start == (9, 25) and presets["autumn_foliage"].end == (12, 10)
    assert presets["ski"].start == (1, 1) and presets["ski"].end == (3, 31)
    assert presets["nemophila"].dest_ids == ("HITACHI_SEASIDE_PARK", "HITACHINAKA", "HITACHI_MINAMI_OTA")


def test_presets_round_trip():
    wins = [trend.SeasonWindow("a", (1, 2), (3, 4), ("X", "Y")), trend.SeasonWindow("b", (6, 1), (6, 1))]
    buf = io.StringIO()
    trend.write_presets(wins, buf)
    back = trend.read_presets(io.StringIO(buf.getvalue()))
    assert list(back.values()) == wins


def test_season_series_one_day_window():
    t = ODTensor.from_coords(2023, S, 4, [100], [0], [2], [3])
    w = trend.SeasonWindow("one", (4, 11), (4, 11), ("IC002",))
    (a,) = trend.season_series([t], w, _registry(4))
    assert len(a.values) == 1 and a.series.start == 100 and a.values[0] == 3


def test_season_series_equals_destination_series():
    rng = np.random.default_rng(12)
    reg = _registry(10)
    tensors = [tensor_from_cells(random_cells(rng, 10, y, nnz=600), 10, y) for y in (2022, 2023, 2024)]
    w = trend.SeasonWindow("nemophila", (3, 15), (5, 30), ("IC001", "IC004"))
    out = trend.season_series(tensors, w, reg)
    assert [a.year for a in out] == [2022, 2023, 2024]
    for t, a in zip(tensors, out):
        ref = destination_series(t, w.dest_ids, w.day_range(t.year), reg)
        assert np.array_equal(a.values, ref.values)
        assert a.is_weekend.tolist() == trend.weekend_mask(t.year)[slice(*w.day_range(t.year))].tolist()
    assert len(out[0].values) == 77 and len(out[2].values) == 77


def test_season_series_filters_category_and_missing_year():
    reg = _registry(3)
    spec = ODTensor.from_coords(2023, S, 3, [80], [0], [1], [4])
    unspec = ODTensor.from_coords(2023, U, 3, [80], [0], [1], [9])
    w = trend.SeasonWindow("w", (3, 1), (3, 31), ("IC001",))
    assert trend.season_series([spec, unspec], w, reg)[0].values.sum() == 4
    assert trend.season_series([spec, unspec], w, reg, category=U)[0].values.sum() == 9
    with pytest.raises(KeyError):
        trend.season_series([spec], w, reg, years=[2023, 2024])


def test_holiday_flags():
    t = ODTensor.zeros(2023, S, 2)
    w = trend.SeasonWindow("gw", (4, 28), (5, 7), ("IC000",))
    hol = trend.read_holidays(io.StringIO("date\n2023-04-29\n2023-05-03\n2023-05-04\n2023-05-05\n2024-05-03\n"))
    (a,) = trend.season_series([t], w, _registry(2), holidays=hol)
    flagged = [d for d, h in zip(a.series.dates(), a.is_holiday) if h]
    assert flagged == [date(2023, 4, 29), date(2023, 5, 3), date(2023, 5, 4), date(2023, 5, 5)]


def test_annotated_csv():
    t = ODTensor.from_coords(2023, S, 2, [0], [1], [0], [6])
    w = trend.SeasonWindow("ny", (1, 1), (1, 2), ("IC000",))
    series = trend.season_series([t], w, _registry(2), holidays={date(2023, 1, 2)})
    buf = io.StringIO()
    trend.write_annotated_csv(series, buf)
    assert buf.getvalue() == "date,count,is_weekend,is_holiday\n2023-01-01,6,1,0\n2023-01-02,0,0,1\n"


# -- peaks and growth ---------------------------------------------------------


def _series(values, start=0, year=2023):
    values = np.asarray(values)
    return DaySeries(year, (start, start + len(values)), values)


def test_peak_constant_series():
    assert trend.peak_days(_series([4] * 10, start=50), 1) == [(50, 4)]


def test_peak_single_spike():
    assert trend.peak_days(_series([0, 0, 7, 0]), 1) == [(2, 7)]


def test_peak_order_and_subset():
    s = _series([3, 9, 1, 9, 5], start=10)
    top = trend.peak_days(s, 3)
    assert top == [(11, 9), (13, 9), (14, 5)]
    pairs = set(zip(s.days(), s.values.tolist()))
    assert set(top) <= pairs
    assert len(trend.peak_days(s, 99)) == 5


def test_year_over_year_identical_and_doubled():
    a = _series([1, 2, 3], start=73, year=2022)
    b = _series([1, 2, 3], start=73, year=2023)
    c = _series([2, 4, 6], start=74, year=2024)  # leap year shifts the day index
    assert trend.year_over_year({2022: a, 2023: b}).ratios == (1.0,)
    yoy = trend.year_over_year([c, b, a])
    assert yoy.years == (2022, 2023, 2024)
    assert yoy.ratios == (1.0, 2.0)
    assert yoy.totals == (6, 6, 12)


def test_year_over_year_mismatch():
    with pytest.raises(WindowMismatchError):
        trend.year_over_year([_series([1, 2], 10, 2022), _series([1, 2], 11, 2023)])
    with pytest.raises(ValueError):
        trend.year_over_year([_series([1], 0, 2022)])
