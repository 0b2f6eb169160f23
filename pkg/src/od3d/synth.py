"""Synthetic route-search corpus with planted seasonal, weekly and growth structure.

Each (origin, destination, day) count is an independent Poisson draw with
intensity::

    base_rate * pair_weight[i, j] * season[j, t] * weekend[t] * growth ** (year - first_year)

``pair_weight`` follows a gravity model (product of lognormal IC
popularities, normalised to mean 1 over off-diagonal pairs), so a few pairs
carry most of the demand the way real OD tables do.  The generator keeps the
per-destination intensity it drew from as ground truth.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import TextIO

import numpy as np

from .model import InterchangeRecord, LOG_COLUMNS
from .tensor import day_index, days_in_year
from .trend import SeasonWindow, parse_mmdd

MINUTES_PER_DAY = 1440

# bounding box roughly covering the Japanese expressway network
LON_RANGE = (129.5, 145.5)
LAT_RANGE = (31.0, 45.5)


@dataclass(frozen=True)
class Hotspot:
    """A destination whose demand rises during a seasonal window.

    Without ``peak`` the whole window is lifted by ``peak_multiplier``.  With a
    ``peak`` month-day the lift decays as ``exp(-|t - peak| / peak_width)``
    from ``peak_multiplier`` at the peak towards 1.
    """

    dest: int
    start: str
    end: str
    peak_multiplier: float = 10.0
    weekend_multiplier: float = 1.0
    peak: str | None = None
    peak_width: float = 3.0

    def factor(self, year: int) -> np.ndarray:
        """Per-day multiplier for this hotspot's destination over ``year``."""
        n = days_in_year(year)
        out = np.ones(n)
        s = day_index(date(year, *parse_mmdd(self.start)), year)
        e = day_index(date(year, *parse_mmdd(self.end)), year) + 1
        t = np.arange(s, e)
        if self.peak is None:
            out[s:e] = self.peak_multiplier
        else:
            p = day_index(date(year, *parse_mmdd(self.peak)), year)
            out[s:e] = 1.0 + (self.peak_multiplier - 1.0) * np.exp(-np.abs(t - p) / self.peak_width)
        first = date(year, 1, 1).weekday()
        weekend = (first + t) % 7 >= 5
        out[s:e][weekend] *= self.weekend_multiplier
        return out


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    years: tuple[int, ...] = (2022, 2023)
    n_ics: int = 200
    base_rate: float = 0.003
    hotspots: tuple[Hotspot, ...] = (
        Hotspot(dest=7, start="0315", end="0530", peak_multiplier=10.0,
                weekend_multiplier=1.5, peak="0503", peak_width=4.0),
    )
    specified_fraction: float = 0.35
    yearly_growth: float = 1.2
    lookahead_days: int = 30
    weekend_factor: float = 1.2
    popularity_sigma: float = 1.0
    # share of unspecified records that still carry a stale (past or equal) time
    stale_fraction: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        object.__setattr__(self, "hotspots", tuple(
            h if isinstance(h, Hotspot) else Hotspot(**h) for h in self.hotspots
        ))
        if self.n_ics < 1:
            raise ValueError("n_ics must be >= 1")
        if not self.years or len(set(self.years)) != len(self.years):
            raise ValueError("years must be a non-empty list of distinct years")
        for name in ("base_rate", "yearly_growth", "weekend_factor", "popularity_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("specified_fraction", "stale_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 1 <= self.lookahead_days <= 365:
            raise ValueError("lookahead_days must lie in [1, 365]")
        for h in self.hotspots:
            if not 0 <= h.dest < self.n_ics:
                raise ValueError(f"hotspot dest {h.dest} outside [0, {self.n_ics})")
            if h.peak_multiplier < 0 or h.weekend_multiplier < 0 or h.peak_width <= 0:
                raise ValueError("hotspot multipliers must be >= 0 and peak_width > 0")
            if parse_mmdd(h.start) > parse_mmdd(h.end):
                raise ValueError(f"hotspot window {h.start}-{h.end} is reversed")

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "GeneratorConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GroundTruth:
    """Per-year destination inflow intensity ``intensity[year][j, t]``."""

    intensity: dict[int, np.ndarray] = field(default_factory=dict)
    planted_peaks: list[tuple[int, int, int]] = field(default_factory=list)  # (year, dest, day)

    def peak_day(self, year: int, dest: int) -> int:
        for y, d, t in self.planted_peaks:
            if (y, d) == (year, dest):
                return t
        raise KeyError((year, dest))


@dataclass
class GenerationResult:
    n_records: int
    ground_truth: GroundTruth


def ic_id(k: int, n_ics: int) -> str:
    width = max(4, len(str(n_ics - 1)))
    return f"IC{k:0{width}d}"


def make_registry(n_ics: int, seed: int = 0) -> list[InterchangeRecord]:
    """``n_ics`` synthetic interchanges with distinct coordinates.

    Ids are handed out in (longitude, latitude) order, so ``IC0000`` is also
    index 0 once the entries go through :func:`od3d.model.build_registry`.
    """
    if n_ics < 1:
        raise ValueError("n_ics must be >= 1")
    rng = np.random.default_rng([seed, 0x1C])
    coords: set[tuple[float, float]] = set()
    while len(coords) < n_ics:
        need = n_ics - len(coords)
        lon = np.round(rng.uniform(*LON_RANGE, size=need), 5)
        lat = np.round(rng.uniform(*LAT_RANGE, size=need), 5)
        coords.update(zip(lon.tolist(), lat.tolist()))
    # set iteration order is not reproducible; sort before truncating
    ordered = sorted(coords)[:n_ics]
    return [
        InterchangeRecord(ic_id(k, n_ics), f"Synthetic IC {k}", lon, lat)
        for k, (lon, lat) in enumerate(ordered)
    ]


def pair_weights(config: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    n = config.n_ics
    pop = rng.lognormal(0.0, config.popularity_sigma, size=n)
    w = np.outer(pop, pop)
    np.fill_diagonal(w, 0.0)
    if n > 1:
        w *= (n * (n - 1)) / w.sum()
    else:
        w[:] = 1.0  # a single IC only has its self-loop
    return w


def destination_factors(config: GeneratorConfig, year: int) -> np.ndarray:
    out = np.ones((config.n_ics, days_in_year(year)))
    for h in config.hotspots:
        out[h.dest] *= h.factor(year)
    return out


def _format_lines(rows, ids: list[str], base_ord: int) -> list[str]:
    search_min, spec_min, orig, dest = rows
    hhmm = [f"{m // 60:02d}:{m % 60:02d}" for m in range(MINUTES_PER_DAY)]
    day_cache: dict[int, str] = {}

    def stamp(m: int) -> str:
        d, r = divmod(m, MINUTES_PER_DAY)
        s = day_cache.get(d)
        if s is None:
            s = day_cache[d] = date.fromordinal(base_ord + d).isoformat()
        return f"{s}T{hhmm[r]}"

    return [
        f"{stamp(s)},{ids[i]},{ids[j]},{stamp(p) if p >= 0 else ''}"
        for s, p, i, j in zip(search_min.tolist(), spec_min.tolist(), orig.tolist(), dest.tolist())
    ]


def generate(config: GeneratorConfig, sink: TextIO | str | Path, *, header: bool = True) -> GenerationResult:
    """Write a log CSV drawn from ``config``; returns the count and ground truth.

    Identical config (including seed) gives byte-identical output.  Records
    are sorted by search time.
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            return generate(config, fh, header=header)

    rng = np.random.default_rng(config.seed)
    ids = [ic_id(k, config.n_ics) for k in range(config.n_ics)]
    weights = pair_weights(config, rng)
    first_year = config.years[0]
    base_ord = date(min(config.years) - 1, 1, 1).toordinal()
    truth = GroundTruth()
    chunks = []

    for year in config.years:
        n_days = days_in_year(year)
        growth = config.yearly_growth ** (year - first_year)
        weekday = (date(year, 1, 1).weekday() + np.arange(n_days)) % 7
        day_scale = config.base_rate * growth * np.where(weekday >= 5, config.weekend_factor, 1.0)
        dest_factor = destination_factors(config, year)
        col_weight = weights.sum(axis=0)
        truth.intensity[year] = day_scale[None, :] * col_weight[:, None] * dest_factor
        for h in config.hotspots:
            s = day_index(date(year, *parse_mmdd(h.start)), year)
            e = day_index(date(year, *parse_mmdd(h.end)), year) + 1
            t = s + int(np.argmax(truth.intensity[year][h.dest, s:e]))
            truth.planted_peaks.append((year, h.dest, t))

        day0 = date(year, 1, 1).toordinal() - base_ord
        for t in range(n_days):
            lam = weights * (day_scale[t] * dest_factor[:, t])[None, :]
            counts = rng.poisson(lam)
            i, j = np.nonzero(counts)
            if len(i) == 0:
                continue
            reps = counts[i, j]
            chunks.append((np.full(reps.sum(), day0 + t, dtype=np.int64),
                           np.repeat(i, reps), np.repeat(j, reps)))

    if chunks:
        day = np.concatenate([c[0] for c in chunks])
        orig = np.concatenate([c[1] for c in chunks])
        dest = np.concatenate([c[2] for c in chunks])
    else:
        day = orig = dest = np.zeros(0, dtype=np.int64)
    n = len(day)

    # minute stamps relative to base_ord; -1 marks an empty specified_time
    is_spec = rng.random(n) < config.specified_fraction
    in_day = rng.integers(0, MINUTES_PER_DAY, size=n)
    gap = rng.integers(1, config.lookahead_days * MINUTES_PER_DAY + 1, size=n)
    stale = rng.random(n) < config.stale_fraction
    stale_gap = rng.integers(0, MINUTES_PER_DAY, size=n)
    anchor = day * MINUTES_PER_DAY + in_day
    search_min = np.where(is_spec, anchor - gap, anchor)
    spec_min = np.where(is_spec, anchor, np.where(stale, anchor - stale_gap, -1))

    order = np.argsort(search_min, kind="stable")
    rows = (search_min[order], spec_min[order], orig[order], dest[order])

    if header:
        sink.write(",".join(LOG_COLUMNS) + "\n")
    lines = _format_lines(rows, ids, base_ord)
    if lines:
        sink.write("\n".join(lines) + "\n")
    return GenerationResult(n, truth)


def hotspot_windows(config: GeneratorConfig) -> list[SeasonWindow]:
    """Season windows matching each planted hotspot (label ``hotspotK``)."""
    return [
        SeasonWindow(f"hotspot{k}", parse_mmdd(h.start), parse_mmdd(h.end),
                     (ic_id(h.dest, config.n_ics),))
        for k, h in enumerate(config.hotspots)
    ]


def write_ground_truth(truth: GroundTruth, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for year, table in sorted(truth.intensity.items()):
        p = out_dir / f"ground_truth_{year}.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dest_index", "day_index", "intensity"])
            for j in range(table.shape[0]):
                for t in range(table.shape[1]):
                    w.writerow([j, t, f"{table[j, t]:.9g}"])
        paths.append(p)
    p = out_dir / "planted_peaks.csv"
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "dest_index", "day_index"])
        w.writerows(truth.planted_peaks)
    paths.append(p)
    return paths
