"""Origin x destination x day count tensors from route-search logs."""

from .model import (
    ICRegistry,
    InterchangeRecord,
    LogReader,
    SearchRecord,
    TimeCategory,
    build_registry,
    classify,
    effective_timestamp,
    parse_record,
    read_registry,
)
from .query import (
    DaySeries,
    ODMatrix,
    aggregate_over_origin,
    destination_series,
    slice_time,
    top_k_origins,
    total,
)
from .storage import load, save
from .tensor import IngestStats, ODTensor, build_od_tensor, build_tensors, day_index, merge
from .trend import SeasonWindow, monthly_totals, peak_days, season_series, weekend_mask, year_over_year

__version__ = "0.1.0"

__all__ = [
    "DaySeries",
    "ICRegistry",
    "IngestStats",
    "InterchangeRecord",
    "LogReader",
    "ODMatrix",
    "ODTensor",
    "SearchRecord",
    "SeasonWindow",
    "TimeCategory",
    "aggregate_over_origin",
    "build_od_tensor",
    "build_registry",
    "build_tensors",
    "classify",
    "day_index",
    "destination_series",
    "effective_timestamp",
    "load",
    "merge",
    "monthly_totals",
    "parse_record",
    "peak_days",
    "read_registry",
    "save",
    "season_series",
    "slice_time",
    "top_k_origins",
    "total",
    "weekend_mask",
    "year_over_year",
]
