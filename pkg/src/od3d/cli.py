"""Command-line entry point: ``od3d gen|build|query|trend|info``.

Exit status: 0 on success, 1 on data errors (bad records, damaged tensor
files, unknown ICs), 2 on usage errors (bad arguments, missing inputs).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import date
from pathlib import Path
from typing import Sequence

from . import query, storage, synth, trend
from .errors import Od3dError, UnknownICError
from .model import (
    LogReader,
    TimeCategory,
    build_registry,
    read_registry,
    write_registry,
)
from .tensor import IngestStats, build_tensors, merge

OUTPUT_DIR_ENV = "OD3D_OUTPUT_DIR"

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _category(text: str) -> TimeCategory:
    try:
        return TimeCategory.from_label(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _existing(path: str | os.PathLike) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {p}")
    return p


def _default_out() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, ".")


def _split_ids(values: Sequence[str] | None) -> list[str]:
    out: list[str] = []
    for v in values or ():
        out.extend(s for s in (x.strip() for x in v.replace(";", ",").split(",")) if s)
    return out


class _Output:
    """Context manager yielding stdout or an opened file."""

    def __init__(self, path: str | None) -> None:
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path in (None, "-"):
            return sys.stdout
        Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(self.path, "w", newline="", encoding="utf-8")
        return self.fh

    def __exit__(self, *exc) -> None:
        if self.fh is not None:
            self.fh.close()


def _write_rows(rows, fh, header=("key", "value")) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(header)
    w.writerows(rows)


# -- gen ----------------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    data = {}
    if args.config:
        data = json.loads(_existing(args.config).read_text(encoding="utf-8"))
    for name in ("seed", "n_ics", "base_rate", "years", "specified_fraction", "yearly_growth"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    if args.no_hotspots:
        data["hotspots"] = ()
    config = synth.GeneratorConfig.from_dict(data)

    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    entries = synth.make_registry(config.n_ics, config.seed)
    with open(out / "registry.csv", "w", newline="", encoding="utf-8") as fh:
        write_registry(entries, fh)
    result = synth.generate(config, out / "logs.csv", header=not args.no_header)
    synth.write_ground_truth(result.ground_truth, out)
    with open(out / "season_presets.csv", "w", newline="", encoding="utf-8") as fh:
        trend.write_presets(synth.hotspot_windows(config), fh)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
    _write_rows([("records", result.n_records), ("n_ics", config.n_ics),
                 ("years", ";".join(map(str, config.years))), ("out_dir", str(out))], sys.stdout)
    return EXIT_OK


# -- build --------------------------------------------------------------------


def _build_chunk(lines, first_line_no, entries, year, skip_malformed):
    registry = build_registry(entries)
    reader = LogReader(lines, skip_malformed=skip_malformed, first_line_no=first_line_no)
    tensors, stats = build_tensors(reader, registry, year, skip_unknown=True)
    stats.add_malformed(reader.malformed)
    return tensors, stats


def build_year(logs: Path, registry, year: int, *, header: bool, skip_unknown: bool,
               skip_malformed: bool, jobs: int = 1):
    """Scan ``logs`` once and return ``(tensors_by_category, stats)`` for ``year``."""
    if jobs <= 1:
        with open(logs, newline="", encoding="utf-8") as fh:
            reader = LogReader(fh, header=header, skip_malformed=skip_malformed)
            tensors, stats = build_tensors(reader, registry, year, skip_unknown=True)
        stats.add_malformed(reader.malformed)
    else:
        with open(logs, newline="", encoding="utf-8") as fh:
            lines = fh.readlines()
        first = 1
        if header and lines:
            lines, first = lines[1:], 2
        size = max(1, -(-len(lines) // jobs))
        entries = list(registry.entries)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_build_chunk, lines[k:k + size], first + k, entries, year, skip_malformed)
                for k in range(0, len(lines), size)
            ]
            parts = [f.result() for f in futures]
        tensors = None
        stats = IngestStats()
        for part_tensors, part_stats in parts:
            stats = stats.combine(part_stats)
            tensors = part_tensors if tensors is None else {
                c: merge(tensors[c], part_tensors[c]) for c in TimeCategory
            }
        if tensors is None:
            tensors, _ = build_tensors([], registry, year)
    if stats.unknown_ic and not skip_unknown:
        raise UnknownICError(stats.unknown_ids, count=stats.unknown_ic)
    return tensors, stats


def cmd_build(args: argparse.Namespace) -> int:
    logs = _existing(args.logs)
    registry = read_registry(_existing(args.registry))
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for year in args.year:
        tensors, stats = build_year(
            logs, registry, year, header=args.header, skip_unknown=args.skip_unknown_ic,
            skip_malformed=args.skip_malformed, jobs=args.jobs,
        )
        rows.extend((year, k, v) for k, v in stats.as_rows())
        for cat in (TimeCategory.SPECIFIED, TimeCategory.UNSPECIFIED):
            path = out / storage.tensor_filename(year, cat)
            storage.save(tensors[cat], path)
            rows.append((year, f"total_{cat.label}", tensors[cat].total))
            rows.append((year, f"file_{cat.label}", str(path)))
        rows.append((year, "reconciled", int(stats.reconciles())))
    _write_rows(rows, sys.stdout, header=("year", "metric", "value"))
    return EXIT_OK


# -- query --------------------------------------------------------------------


def _day_range(args: argparse.Namespace, tensor) -> tuple[int, int]:
    if args.days is not None:
        if args.date_from or args.date_to:
            raise UsageError("--days cannot be combined with --from/--to")
        return query.check_range(tensor, args.days)
    if args.date_from is None and args.date_to is None:
        return 0, tensor.n_days
    first = args.date_from or date(tensor.year, 1, 1)
    last = args.date_to or date(tensor.year, 12, 31)
    return query.date_range(tensor.year, first, last)


def _need_registry(args: argparse.Namespace):
    if not args.registry:
        raise UsageError(f"query {args.query_op} requires --registry")
    return read_registry(_existing(args.registry))


def cmd_query(args: argparse.Namespace) -> int:
    tensor = storage.load(_existing(args.tensor))
    day_range = _day_range(args, tensor)
    op = args.query_op
    with _Output(args.output) as fh:
        if op == "sum":
            registry = _need_registry(args)
            query.write_destination_totals_csv(
                query.aggregate_over_origin(tensor, day_range), registry, fh)
        elif op == "slice":
            query.write_matrix_csv(query.slice_time(tensor, *day_range), fh)
        elif op == "topk":
            registry = _need_registry(args)
            if not args.dest:
                raise UsageError("query topk requires --dest")
            rows = query.top_k_origins(tensor, args.dest, day_range, args.k, registry)
            query.write_topk_csv(rows, fh)
        elif op == "series":
            registry = _need_registry(args)
            ids = _split_ids([args.dest] if args.dest else None)
            if not ids:
                raise UsageError("query series requires --dest")
            query.write_series_csv(query.destination_series(tensor, ids, day_range, registry), fh)
    return EXIT_OK


# -- trend --------------------------------------------------------------------


def cmd_trend(args: argparse.Namespace) -> int:
    tensors = [storage.load(_existing(p)) for p in args.tensors]
    if args.trend_op == "monthly":
        with _Output(args.output) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["year", "category", "month", "count"])
            for t in tensors:
                for m, c in enumerate(trend.monthly_totals(t), start=1):
                    w.writerow([t.year, t.category.label, m, int(c)])
        return EXIT_OK

    registry = read_registry(_existing(args.registry))
    presets = trend.read_presets(_existing(args.presets) if args.presets else None)
    if args.preset not in presets:
        raise UsageError(f"unknown preset {args.preset!r}; available: {', '.join(sorted(presets))}")
    window = presets[args.preset]
    dest = _split_ids(args.dest)
    if dest:
        window = window.with_destinations(dest)
    holidays = trend.read_holidays(_existing(args.holidays)) if args.holidays else None
    series = trend.season_series(tensors, window, registry, years=args.years,
                                 category=args.category, holidays=holidays)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for a in series:
            with open(out / f"{window.label}_{a.year}.csv", "w", newline="", encoding="utf-8") as fh:
                trend.write_annotated_csv(a, fh)
    with _Output(args.output) as fh:
        if args.peaks:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["year", "rank", "day_index", "date", "count"])
            for a in series:
                for rank, (t, c) in enumerate(trend.peak_days(a, args.peaks), start=1):
                    w.writerow([a.year, rank, t, trend.date_of(a.year, t).isoformat(), c])
        elif args.yoy:
            trend.write_yoy_csv(trend.year_over_year([a.series for a in series]), fh)
        elif not args.out_dir:
            trend.write_annotated_csv(series, fh)
    return EXIT_OK


# -- info ---------------------------------------------------------------------


def cmd_info(args: argparse.Namespace) -> int:
    header = storage.read_header(_existing(args.tensor))
    with _Output(args.output) as fh:
        _write_rows(header.as_rows(), fh, header=("field", "value"))
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_range_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--days", nargs=2, type=int, metavar=("START", "END"),
                   help="half-open day-index range [START, END)")
    p.add_argument("--from", dest="date_from", type=_iso_date, metavar="YYYY-MM-DD",
                   help="first date (inclusive)")
    p.add_argument("--to", dest="date_to", type=_iso_date, metavar="YYYY-MM-DD",
                   help="last date (inclusive)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="od3d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic log corpus and registry")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--config", help="GeneratorConfig as JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-ics", type=int)
    p.add_argument("--base-rate", type=float)
    p.add_argument("--years", type=int, nargs="+")
    p.add_argument("--specified-fraction", type=float)
    p.add_argument("--yearly-growth", type=float)
    p.add_argument("--no-hotspots", action="store_true")
    p.add_argument("--no-header", action="store_true", help="omit the log CSV header row")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build", help="build specified/unspecified tensors from a log CSV")
    p.add_argument("--logs", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--year", type=int, nargs="+", required=True)
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--header", action="store_true", help="log CSV has a header row")
    p.add_argument("--skip-unknown-ic", action="store_true",
                   help="count and drop records naming unknown ICs instead of failing")
    p.add_argument("--skip-malformed", action="store_true",
                   help="count and drop unparseable rows instead of failing")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="query a tensor file")
    qsub = p.add_subparsers(dest="query_op", required=True)
    for name, help_text in (("sum", "per-destination totals"), ("slice", "OD matrix over a range"),
                            ("topk", "top origins for a destination"),
                            ("series", "daily series into destination(s)")):
        q = qsub.add_parser(name, help=help_text)
        q.add_argument("--tensor", required=True)
        q.add_argument("--registry")
        q.add_argument("--output", "-o", help="CSV output path (default stdout)")
        _add_range_args(q)
        if name in ("topk", "series"):
            q.add_argument("--dest", help="destination ic_id" + (" (comma-separated)" if name == "series" else ""))
        if name == "topk":
            q.add_argument("--k", type=int, default=10)
        q.set_defaults(func=cmd_query)

    p = sub.add_parser("trend", help="trend reports")
    tsub = p.add_subparsers(dest="trend_op", required=True)
    q = tsub.add_parser("monthly", help="monthly totals per tensor")
    q.add_argument("--tensors", nargs="+", required=True)
    q.add_argument("--output", "-o")
    q.set_defaults(func=cmd_trend)
    q = tsub.add_parser("season", help="seasonal window series, one per year")
    q.add_argument("--tensors", nargs="+", required=True)
    q.add_argument("--registry", required=True)
    q.add_argument("--preset", required=True, help="window label from the presets file")
    q.add_argument("--presets", help="presets CSV (default: bundled tourism seasons)")
    q.add_argument("--dest", nargs="+", help="override the preset's destination ic_ids")
    q.add_argument("--category", type=_category, default=TimeCategory.SPECIFIED)
    q.add_argument("--years", type=int, nargs="+")
    q.add_argument("--holidays", help="CSV of YYYY-MM-DD holiday dates")
    q.add_argument("--out-dir", help="also write one CSV per year here")
    q.add_argument("--output", "-o")
    g = q.add_mutually_exclusive_group()
    g.add_argument("--peaks", type=int, metavar="K", help="report the K peak days per year")
    g.add_argument("--yoy", action="store_true", help="report year-over-year totals")
    q.set_defaults(func=cmd_trend)

    p = sub.add_parser("info", help="dump a tensor file header")
    p.add_argument("tensor")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"od3d: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (Od3dError, ValueError, KeyError) as exc:
        print(f"od3d: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BrokenPipeError:
        # downstream closed early (e.g. `| head`); silence the flush at exit
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
