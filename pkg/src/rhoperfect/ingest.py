"""Long-format rating files -> RatingsTable.

One record per rating: item, rater, value and an optional condition column
(several tags separated by ``;``). CSV and JSON lines are supported; JSON lines
records use the keys ``item``, ``rater``, ``value``, ``condition``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .core import Item, Rating, RatingsTable
from .errors import IngestError

TAG_SEP = ";"


@dataclass
class ColumnMapping:
    """Column names (str) or zero-based positions (int)."""

    item: str | int = "item"
    rater: str | int = "rater"
    value: str | int = "value"
    condition: str | int | None = None


MOVIELENS = ColumnMapping(item="movieId", rater="userId", value="rating")


@dataclass
class IngestOptions:
    min_ratings_per_item: int = 2
    per_rater_aggregate: bool = False
    columns: ColumnMapping = field(default_factory=ColumnMapping)
    delimiter: str = ","
    header: bool = True
    fail_fast: bool = False

    def __post_init__(self):
        if self.min_ratings_per_item < 1:
            raise ValueError("min_ratings_per_item must be >= 1")
        if not self.header:
            for name in ("item", "rater", "value", "condition"):
                col = getattr(self.columns, name)
                if col is not None and not isinstance(col, int):
                    raise ValueError(f"without a header, column {name!r} must be an integer position")


@dataclass
class IngestStats:
    rows_read: int = 0
    rows_rejected: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)
    items_kept: int = 0
    items_dropped: int = 0
    ratings_min: int = 0
    ratings_mean: float = 0.0
    ratings_max: int = 0

    def to_dict(self):
        return {
            "rows_read": self.rows_read,
            "rows_rejected": self.rows_rejected,
            "rejections": [{"line": ln, "reason": why} for ln, why in self.rejections],
            "items_kept": self.items_kept,
            "items_dropped": self.items_dropped,
            "ratings_min": self.ratings_min,
            "ratings_mean": self.ratings_mean,
            "ratings_max": self.ratings_max,
        }


def _csv_rows(path: Path, options: IngestOptions) -> Iterator[tuple[int, dict | list]]:
    with open(path, newline="", encoding="utf-8") as fh:
        if options.header:
            reader = csv.DictReader(fh, delimiter=options.delimiter)
            fields = reader.fieldnames or []
            for name in ("item", "rater", "value", "condition"):
                col = getattr(options.columns, name)
                if isinstance(col, str) and col not in fields:
                    raise IngestError(f"{path}: column {col!r} not found in header {fields}")
            for row in reader:
                yield reader.line_num, row
        else:
            reader = csv.reader(fh, delimiter=options.delimiter)
            for row in reader:
                yield reader.line_num, row


def _jsonl_rows(path: Path) -> Iterator[tuple[int, dict | None]]:
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError:
                rec = None
            yield ln, rec if isinstance(rec, dict) else None


def _get(row, col, fields_by_pos):
    if col is None:
        return None
    if isinstance(row, dict):
        key = fields_by_pos[col] if isinstance(col, int) else col
        return row.get(key)
    return row[col] if col < len(row) else None


def _records(path, options: IngestOptions, stats: IngestStats):
    """Yield (item, rater, value, tags) per valid row, recording rejections."""
    path = Path(path)
    is_jsonl = path.suffix.lower() in (".jsonl", ".ndjson")
    cols = ColumnMapping("item", "rater", "value", "condition") if is_jsonl else options.columns
    try:
        rows = _jsonl_rows(path) if is_jsonl else _csv_rows(path, options)
        fields_by_pos = None
        for ln, row in rows:
            stats.rows_read += 1
            reason = None
            if row is None:
                reason = "not a JSON object"
            else:
                if fields_by_pos is None and isinstance(row, dict):
                    fields_by_pos = list(row.keys())
                try:
                    item = _get(row, cols.item, fields_by_pos)
                    rater = _get(row, cols.rater, fields_by_pos)
                    raw = _get(row, cols.value, fields_by_pos)
                    cond = _get(row, cols.condition, fields_by_pos)
                except IndexError:
                    item = rater = raw = cond = None
                if item in (None, "") or rater in (None, ""):
                    reason = "missing item or rater"
                elif raw in (None, ""):
                    reason = "missing value"
                else:
                    try:
                        value = float(raw)
                    except (TypeError, ValueError):
                        value = None
                    if value is None or not math.isfinite(value):
                        reason = f"non-numeric or non-finite value {raw!r}"
            if reason:
                stats.rows_rejected += 1
                stats.rejections.append((ln, reason))
                if options.fail_fast:
                    raise IngestError(f"{path}:{ln}: {reason}")
                continue
            tags = frozenset(t.strip() for t in str(cond).split(TAG_SEP) if t.strip()) if cond not in (None, "") else frozenset()
            yield str(item), str(rater), value, tags
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from None
    except (UnicodeDecodeError, csv.Error) as exc:
        raise IngestError(f"{path}: unparseable file: {exc}") from None


def aggregate_per_rater(table: RatingsTable) -> RatingsTable:
    """Replace repeated ratings by one rater on one item with their mean."""
    items = []
    for it in table.items:
        groups: OrderedDict[str, list[float]] = OrderedDict()
        for r in it.ratings:
            groups.setdefault(r.rater_id, []).append(r.value)
        ratings = tuple(
            Rating(rid, vals[0] if len(vals) == 1 else math.fsum(vals) / len(vals)) for rid, vals in groups.items()
        )
        items.append(Item(it.item_id, ratings, it.condition_tags))
    return table.with_items(items)


def parse_long(path, options: IngestOptions | None = None) -> tuple[RatingsTable, IngestStats]:
    options = options or IngestOptions()
    stats = IngestStats()
    ratings: OrderedDict[str, list[Rating]] = OrderedDict()
    tags: dict[str, set[str]] = {}
    for item, rater, value, t in _records(path, options, stats):
        ratings.setdefault(item, []).append(Rating(rater, value))
        tags.setdefault(item, set()).update(t)
    table = RatingsTable(tuple(Item(i, tuple(rs), frozenset(tags[i])) for i, rs in ratings.items()))
    if options.per_rater_aggregate:
        table = aggregate_per_rater(table)

    kept = [it for it in table.items if it.m >= options.min_ratings_per_item]
    stats.items_dropped = table.n - len(kept)
    stats.items_kept = len(kept)
    table = table.with_items(kept)
    if kept:
        counts = table.counts
        stats.ratings_min = int(counts.min())
        stats.ratings_max = int(counts.max())
        stats.ratings_mean = float(counts.mean())
    return table, stats


parse_long_csv = parse_long


@dataclass
class PredictionColumns:
    item: str | int = "item"
    prediction: str | int = "prediction"


def parse_predictions_csv(path, columns: PredictionColumns | None = None, delimiter: str = ",") -> dict[str, float]:
    """item_id -> model prediction. Duplicate items keep the last value (with a warning)."""
    columns = columns or PredictionColumns()
    opts = IngestOptions(
        columns=ColumnMapping(item=columns.item, rater=columns.item, value=columns.prediction),
        delimiter=delimiter,
    )
    out: dict[str, float] = {}
    dups = []
    stats = IngestStats()
    for item, _, value, _ in _records(path, opts, stats):
        if item in out:
            dups.append(item)
        out[item] = value
    if stats.rows_rejected:
        warnings.warn(f"{stats.rows_rejected} malformed prediction row(s) skipped, first at line {stats.rejections[0][0]}")
    if dups:
        warnings.warn(f"{len(dups)} duplicate prediction row(s); kept the last value for {sorted(set(dups))[:5]}")
    return out


def subset(table: RatingsTable, tag: str) -> RatingsTable:
    return table.with_items(it for it in table.items if tag in it.condition_tags)


def conditions(table: RatingsTable) -> list[str]:
    return sorted({t for it in table.items for t in it.condition_tags})


def write_long_csv(table: RatingsTable, path, delimiter: str = ",") -> None:
    """Write ``item,rater,value,condition`` rows; values use round-trip ``repr``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["item", "rater", "value", "condition"])
        for it in table.items:
            cond = TAG_SEP.join(sorted(it.condition_tags))
            for r in it.ratings:
                w.writerow([it.item_id, r.rater_id, repr(float(r.value)), cond])
