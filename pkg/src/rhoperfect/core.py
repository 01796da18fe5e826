"""Rating tables and the rho-Perfect estimator.

rho-Perfect is the correlation a perfect predictor E[Y|X] would reach against
the observed per-item mean ratings:

    rho = sqrt(Var(Yhat) / Var(Y)),   Var(Yhat) = Var(Y) - E[Var(Y|X)]

where Var(Y) is the unbiased variance of the item means and E[Var(Y|X)] is the
unweighted item average of s_i^2 / m_i.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateVariance,
    EmptyItem,
    ShapeError,
    TooFewItems,
    UndefinedConditionalVariance,
)

MIN_ITEMS = 50
MIN_RATINGS = 3
# rounding slack, in ulps of the largest rating relative to the rating spread
CANCELLATION_ULPS = 64


class Rating(NamedTuple):
    rater_id: str
    value: float


@dataclass(frozen=True)
class Item:
    item_id: str
    ratings: tuple[Rating, ...]
    condition_tags: frozenset[str] = frozenset()

    def __post_init__(self):
        ratings = tuple(r if isinstance(r, Rating) else Rating(*r) for r in self.ratings)
        for r in ratings:
            if not math.isfinite(r.value):
                raise ValueError(f"item {self.item_id!r}: non-finite rating {r.value!r}")
        object.__setattr__(self, "ratings", ratings)
        object.__setattr__(self, "condition_tags", frozenset(self.condition_tags))

    @classmethod
    def from_values(cls, item_id, values, raters=None, tags=()):
        values = [float(v) for v in values]
        if raters is None:
            raters = [f"r{j}" for j in range(len(values))]
        if len(raters) != len(values):
            raise ShapeError("raters and values differ in length")
        return cls(str(item_id), tuple(Rating(str(r), v) for r, v in zip(raters, values)), frozenset(tags))

    @property
    def m(self) -> int:
        return len(self.ratings)

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.ratings], dtype=np.float64)

    @property
    def rater_ids(self) -> list[str]:
        return [r.rater_id for r in self.ratings]


@dataclass(frozen=True)
class RatingsTable:
    items: tuple[Item, ...]
    scale_hint: tuple[float, float] | None = None

    def __post_init__(self):
        items = tuple(self.items)
        seen = set()
        for it in items:
            if it.item_id in seen:
                raise ValueError(f"duplicate item_id {it.item_id!r}")
            seen.add(it.item_id)
        object.__setattr__(self, "items", items)

    @classmethod
    def from_lists(cls, rating_lists: Iterable[Sequence[float]], scale_hint=None):
        """Build a table from plain per-item rating lists; ids are ``i0, i1, ...``."""
        return cls(tuple(Item.from_values(f"i{i}", vals) for i, vals in enumerate(rating_lists)), scale_hint)

    def __len__(self):
        return len(self.items)

    @property
    def n(self) -> int:
        return len(self.items)

    @property
    def item_ids(self) -> list[str]:
        return [it.item_id for it in self.items]

    @cached_property
    def counts(self) -> np.ndarray:
        return np.array([it.m for it in self.items], dtype=np.int64)

    @cached_property
    def flat_values(self) -> np.ndarray:
        if not self.items:
            return np.zeros(0)
        return np.concatenate([it.values for it in self.items])

    @cached_property
    def flat_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.counts)

    @cached_property
    def flat_rater_codes(self) -> np.ndarray:
        """Per-rating index into ``rater_ids()``."""
        code = {r: k for k, r in enumerate(self.rater_ids())}
        return np.array([code[r.rater_id] for it in self.items for r in it.ratings], dtype=np.int64)

    @property
    def total_ratings(self) -> int:
        return int(self.counts.sum())

    def rater_ids(self) -> list[str]:
        """Distinct rater ids in sorted order."""
        return list(self._sorted_raters)

    @cached_property
    def _sorted_raters(self) -> tuple[str, ...]:
        return tuple(sorted({r.rater_id for it in self.items for r in it.ratings}))

    def with_items(self, items) -> RatingsTable:
        return RatingsTable(tuple(items), self.scale_hint)

    def map_values(self, fn) -> RatingsTable:
        return self.with_items(
            Item(it.item_id, tuple(Rating(r.rater_id, float(fn(r.value))) for r in it.ratings), it.condition_tags)
            for it in self.items
        )


class DegeneratePolicy(enum.Enum):
    DROP = "drop"
    STRICT = "strict"


class WarningCode(str, enum.Enum):
    FEW_ITEMS = "FewItems"
    FEW_RATINGS = "FewRatings"
    CLAMPED_VARIANCE = "ClampedVariance"
    SINGLE_RATING_ITEM_DROPPED = "SingleRatingItemDropped"


@dataclass(frozen=True)
class TableWarning:
    code: WarningCode
    detail: str
    affected_count: int

    def to_dict(self):
        return {"code": self.code.value, "detail": self.detail, "affected_count": self.affected_count}


@dataclass
class RhoEstimate:
    rho: float
    var_y: float
    var_yhat_raw: float
    expected_cond_var: float
    clamped: bool
    n_items: int
    n_ratings: int
    warnings: list[TableWarning] = field(default_factory=list)

    @property
    def rho_sq(self) -> float:
        return self.rho * self.rho

    def to_dict(self):
        return {
            "rho": self.rho,
            "var_y": self.var_y,
            "var_yhat_raw": self.var_yhat_raw,
            "expected_cond_var": self.expected_cond_var,
            "clamped": self.clamped,
            "n_items": self.n_items,
            "n_ratings": self.n_ratings,
            "warnings": [w.to_dict() for w in self.warnings],
        }


# -- per-item statistics ------------------------------------------------------


def _item_means(table: RatingsTable) -> np.ndarray:
    # two-pass: naive mean, then add back the mean residual
    counts = table.counts
    if (counts == 0).any():
        bad = [it.item_id for it in table.items if it.m == 0]
        raise EmptyItem(f"items without ratings: {bad[:5]}")
    idx, vals = table.flat_index, table.flat_values
    means = np.bincount(idx, weights=vals, minlength=table.n) / counts
    means += np.bincount(idx, weights=vals - means[idx], minlength=table.n) / counts
    return means


def _item_cond_vars(table: RatingsTable) -> np.ndarray:
    """s_i^2 / m_i per item; NaN where m_i < 2."""
    counts = table.counts
    means = _item_means(table)
    dev = table.flat_values - means[table.flat_index]
    ss = np.bincount(table.flat_index, weights=dev * dev, minlength=table.n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = ss / (counts * (counts - 1.0))
    out[counts < 2] = np.nan
    return out


def _variance(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    dev = x - x.mean()
    return float(np.sum(dev * dev) / (len(x) - 1))


def item_mean(item: Item) -> float:
    if item.m == 0:
        raise EmptyItem(f"item {item.item_id!r} has no ratings")
    return math.fsum(item.values) / item.m


def item_conditional_variance(item: Item) -> float:
    """Estimated variance of the item's mean rating, s^2 / m."""
    m = item.m
    if m < 2:
        raise UndefinedConditionalVariance(f"item {item.item_id!r} has {m} rating(s); need >= 2", [item.item_id])
    y = item_mean(item)
    return math.fsum((v - y) ** 2 for v in item.values) / (m * (m - 1))


def item_means(table: RatingsTable) -> np.ndarray:
    return _item_means(table)


def grand_variance(table: RatingsTable) -> float:
    """Unbiased variance of the per-item mean ratings."""
    if table.n < 2:
        raise TooFewItems(f"need at least 2 items, got {table.n}")
    return _variance(_item_means(table))


def expected_conditional_variance(table: RatingsTable) -> float:
    if table.n == 0:
        raise TooFewItems("empty table")
    cv = _item_cond_vars(table)
    bad = np.flatnonzero(np.isnan(cv))
    if len(bad):
        ids = [table.items[i].item_id for i in bad]
        raise UndefinedConditionalVariance(f"{len(ids)} item(s) with fewer than 2 ratings", ids)
    return float(np.sum(cv) / table.n)


def validate_table(table: RatingsTable) -> list[TableWarning]:
    out = []
    if table.n < MIN_ITEMS:
        out.append(TableWarning(WarningCode.FEW_ITEMS, f"{table.n} items; at least {MIN_ITEMS} recommended", table.n))
    few = int(np.sum(table.counts < MIN_RATINGS)) if table.n else 0
    if few:
        out.append(
            TableWarning(
                WarningCode.FEW_RATINGS, f"{few} item(s) with fewer than {MIN_RATINGS} ratings", few
            )
        )
    return out


def drop_single_rated(table: RatingsTable, policy: DegeneratePolicy = DegeneratePolicy.DROP):
    """Apply the degenerate-item policy. Returns ``(table, warnings)``."""
    short = [it for it in table.items if it.m < 2]
    if not short:
        return table, []
    if policy is DegeneratePolicy.STRICT:
        raise UndefinedConditionalVariance(
            f"{len(short)} item(s) with fewer than 2 ratings", [it.item_id for it in short]
        )
    kept = table.with_items(it for it in table.items if it.m >= 2)
    w = TableWarning(
        WarningCode.SINGLE_RATING_ITEM_DROPPED,
        f"dropped {len(short)} item(s) with fewer than 2 ratings",
        len(short),
    )
    return kept, [w]


def rho_perfect(table: RatingsTable, policy: DegeneratePolicy = DegeneratePolicy.DROP) -> RhoEstimate:
    table, warnings = drop_single_rated(table, policy)
    if table.n < 2:
        raise TooFewItems(f"{table.n} usable item(s) after dropping; need at least 2")
    warnings = validate_table(table) + warnings

    var_y = grand_variance(table)
    # item means that agree to within rounding count as equal
    eps = np.finfo(float).eps
    resolution = 16 * eps * float(np.max(np.abs(_item_means(table))))
    if var_y <= resolution * resolution:
        raise DegenerateVariance("all item means are equal; the correlation ceiling is undefined")
    ecv = expected_conditional_variance(table)
    raw = var_y - ecv
    # Each deviation r - mean carries ~eps*max|r| of absolute error, so both
    # variances are only known to a relative eps*max|r|/spread. A difference
    # below that is indistinguishable from 0 and sqrt would amplify it.
    scale = var_y + ecv
    rel = CANCELLATION_ULPS * eps * max(1.0, float(np.max(np.abs(table.flat_values))) / math.sqrt(scale))
    if abs(raw) <= rel * scale:
        raw = 0.0
    clamped = raw < 0.0
    if clamped:
        warnings.append(
            TableWarning(
                WarningCode.CLAMPED_VARIANCE,
                f"rating noise exceeds spread of item means (Var(Yhat) = {raw:.6g}); clamped to 0",
                table.n,
            )
        )
    rho = math.sqrt(max(raw, 0.0) / var_y)
    return RhoEstimate(
        rho=min(rho, 1.0),
        var_y=var_y,
        var_yhat_raw=raw,
        expected_cond_var=ecv,
        clamped=clamped,
        n_items=table.n,
        n_ratings=table.total_ratings,
        warnings=warnings,
    )


def pearson_corr(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise ShapeError("need at least 2 paired values")
    da = a - a.mean()
    db = b - b.mean()
    saa = np.sum(da * da)
    sbb = np.sum(db * db)
    if saa == 0.0 or sbb == 0.0:
        raise DegenerateVariance("constant input to correlation")
    r = float(np.sum(da * db) / math.sqrt(saa * sbb))
    return max(-1.0, min(1.0, r))
