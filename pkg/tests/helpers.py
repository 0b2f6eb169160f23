"""Shared test data and constructors."""

from __future__ import annotations

import numpy as np

from od3d.model import InterchangeRecord, TimeCategory
from od3d.tensor import ODTensor, days_in_year

HAND_REGISTRY = [
    InterchangeRecord("IC001", "Alpha", 139.5, 35.6),
    InterchangeRecord("IC002", "Bravo", 140.2, 36.1),
    InterchangeRecord("IC003", "Charlie", 139.9, 36.4),
]

# future, absent, equal, past (self-loop), future
HAND_LINES = [
    "2023-04-20T09:15,IC001,IC002,2023-04-29T08:00",
    "2023-04-20T09:15,IC001,IC003,",
    "2023-05-01T10:00,IC002,IC001,2023-05-01T10:00",
    "2023-06-10T12:00,IC003,IC003,2023-06-09T08:00",
    "2023-12-20T18:30,IC003,IC001,2023-12-24T09:00",
]


def random_cells(rng: np.random.Generator, n_ics: int, year: int, *, nnz: int,
                 day_span: int | None = None, max_count: int = 9) -> dict:
    """Random sparse ``{(i, j, t): count}`` with days in a window of ``day_span``."""
    n_days = days_in_year(year)
    span = n_days if day_span is None else min(day_span, n_days)
    offset = int(rng.integers(0, n_days - span + 1))
    cells: dict = {}
    for _ in range(nnz):
        key = (int(rng.integers(n_ics)), int(rng.integers(n_ics)), offset + int(rng.integers(span)))
        cells[key] = cells.get(key, 0) + int(rng.integers(1, max_count + 1))
    return cells


def tensor_from_cells(cells: dict, n_ics: int, year: int,
                      category: TimeCategory = TimeCategory.SPECIFIED) -> ODTensor:
    if not cells:
        return ODTensor.zeros(year, category, n_ics)
    keys = list(cells)
    return ODTensor.from_coords(
        year, category, n_ics,
        [k[2] for k in keys], [k[0] for k in keys], [k[1] for k in keys],
        [cells[k] for k in keys],
    )
