"""Simulated test-retest: split one evaluation into two and compare.

If two evaluations of the same items share the same perfect predictor and
their noise is conditionally uncorrelated, Corr(Y1, Y2) ~= rho-Perfect^2 of
either evaluation alone. Two ways to fabricate the pair from one dataset:

* split-raters: partition the rater pool into halves;
* split-ratings: partition each item's ratings into halves.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DegeneratePolicy,
    Item,
    RatingsTable,
    _item_cond_vars,
    _item_means,
    pearson_corr,
    rho_perfect,
)
from .errors import CannotSplit, DegenerateVariance, RhoPerfectError
from .report import fmt_pm, mean_std, render_table
from .rng import derive_seed, stream


class SplitMethod(str, enum.Enum):
    RATERS = "raters"
    RATINGS = "ratings"


@dataclass(frozen=True)
class SplitPair:
    first: RatingsTable
    second: RatingsTable
    method: SplitMethod
    seed: int
    common_items: tuple[str, ...]


def make_pair(first: RatingsTable, second: RatingsTable, method=SplitMethod.RATINGS, seed: int = 0) -> SplitPair:
    in_second = set(second.item_ids)
    common = tuple(i for i in first.item_ids if i in in_second)
    return SplitPair(first, second, SplitMethod(method), int(seed), common)


def _half(m: int) -> int:
    # odd counts put the extra element on the first side
    return (m + 1) // 2


def split_raters(table: RatingsTable, seed: int) -> SplitPair:
    raters = table.rater_ids()
    if len(raters) < 2:
        raise CannotSplit(f"split-raters needs at least 2 distinct raters, found {len(raters)}")
    perm = stream(seed, "split-raters").permutation(len(raters))
    first_raters = {raters[i] for i in perm[: _half(len(raters))]}

    first, second = [], []
    for it in table.items:
        a = tuple(r for r in it.ratings if r.rater_id in first_raters)
        b = tuple(r for r in it.ratings if r.rater_id not in first_raters)
        if a:
            first.append(Item(it.item_id, a, it.condition_tags))
        if b:
            second.append(Item(it.item_id, b, it.condition_tags))
    return make_pair(table.with_items(first), table.with_items(second), SplitMethod.RATERS, seed)


def split_ratings(table: RatingsTable, seed: int) -> SplitPair:
    short = [it.item_id for it in table.items if it.m < 2]
    if short:
        raise CannotSplit(f"split-ratings needs >= 2 ratings per item; offending items: {short[:10]}", short)
    first, second = [], []
    for it in table.items:
        perm = stream(seed, "split-ratings", it.item_id).permutation(it.m)
        mask = np.zeros(it.m, dtype=bool)
        mask[perm[: _half(it.m)]] = True
        first.append(Item(it.item_id, tuple(r for r, k in zip(it.ratings, mask) if k), it.condition_tags))
        second.append(Item(it.item_id, tuple(r for r, k in zip(it.ratings, mask) if not k), it.condition_tags))
    return make_pair(table.with_items(first), table.with_items(second), SplitMethod.RATINGS, seed)


def split(table: RatingsTable, method, seed: int) -> SplitPair:
    method = SplitMethod(method)
    if method is SplitMethod.RATERS:
        return split_raters(table, seed)
    return split_ratings(table, seed)


def _common_views(pair: SplitPair):
    common = set(pair.common_items)
    a = pair.first.with_items(it for it in pair.first.items if it.item_id in common)
    pos = {it.item_id: it for it in pair.second.items}
    b = pair.second.with_items(pos[i] for i in a.item_ids)
    return a, b


def test_retest_corr(pair: SplitPair, min_ratings: int = 2) -> float:
    """Pearson correlation of the two sides' item means.

    Only items with at least ``min_ratings`` ratings on both sides take part;
    the default of 2 matches the items the estimator itself can use, so that
    the correlation and rho-Perfect^2 of a half describe the same items.
    """
    a, b = _common_views(pair)
    ok = (a.counts >= min_ratings) & (b.counts >= min_ratings)
    if ok.sum() < 2:
        raise DegenerateVariance(f"only {int(ok.sum())} item(s) with >= {min_ratings} ratings on both sides")
    return pearson_corr(_item_means(a)[ok], _item_means(b)[ok])


test_retest_corr.__test__ = False  # not a pytest test despite the name


@dataclass
class CondCovEstimate:
    value: float
    stderr: float
    n_items: int


def pair_conditional_cov(pair: SplitPair) -> CondCovEstimate:
    """Estimate E[Cov(Y1, Y2 | X)] from one split.

    For each item, E[(y1 - y2)^2 | X] = V1 + V2 - 2 Cov(Y1, Y2 | X), where V1, V2
    are the conditional variances of the two means. Substituting the unbiased
    s^2/m estimates for V1, V2 and centring the differences (to absorb any
    constant offset between the evaluations) gives a per-item covariance
    estimate whose item average is returned together with its standard error.
    Items with fewer than 2 ratings on either side are skipped.
    """
    a, b = _common_views(pair)
    ca, cb = _item_cond_vars(a), _item_cond_vars(b)
    ok = ~(np.isnan(ca) | np.isnan(cb))
    n = int(ok.sum())
    if n < 2:
        raise DegenerateVariance("fewer than 2 items with >= 2 ratings on both sides")
    d = (_item_means(a) - _item_means(b))[ok]
    d = d - d.mean()
    t = 0.5 * (ca[ok] + cb[ok] - d * d * (n / (n - 1)))
    value = float(np.sum(t) / n)
    stderr = float(np.std(t, ddof=1) / math.sqrt(n))
    return CondCovEstimate(value, stderr, n)


@dataclass
class CondCovResult:
    value: float
    stderr: float
    num_resplits: int
    per_resplit: list[float]

    def within(self, z: float = 3.0) -> bool:
        return abs(self.value) <= z * self.stderr


def conditional_cov_term(table: RatingsTable, method, num_resplits: int, seed: int) -> CondCovResult:
    """Average the per-split estimate over ``num_resplits`` seeded resplits.

    Resplits of one dataset share its sampling error, so ``stderr`` is the mean
    per-split item-level standard error rather than a 1/sqrt(resplits) shrink.
    """
    if num_resplits < 2:
        raise ValueError("num_resplits must be >= 2")
    ests = [pair_conditional_cov(split(table, method, derive_seed(seed, "resplit", r))) for r in range(num_resplits)]
    vals = [e.value for e in ests]
    return CondCovResult(
        value=math.fsum(vals) / len(vals),
        stderr=math.fsum(e.stderr for e in ests) / len(ests),
        num_resplits=num_resplits,
        per_resplit=vals,
    )


@dataclass
class SeedRow:
    seed: int
    rho_sq: float
    retest_corr: float
    cond_cov: float


@dataclass
class ValidationReport:
    method: SplitMethod
    num_seeds: int
    rho_sq_mean: float
    rho_sq_std: float
    retest_corr_mean: float
    retest_corr_std: float
    cond_cov_mean: float
    cond_cov_std: float
    per_seed_rows: list[SeedRow]
    failed_seeds: list[tuple[int, str]] = field(default_factory=list)

    def to_dict(self):
        return {
            "method": self.method.value,
            "num_seeds": self.num_seeds,
            "rho_sq_mean": self.rho_sq_mean,
            "rho_sq_std": self.rho_sq_std,
            "retest_corr_mean": self.retest_corr_mean,
            "retest_corr_std": self.retest_corr_std,
            "cond_cov_mean": self.cond_cov_mean,
            "cond_cov_std": self.cond_cov_std,
            "per_seed_rows": [
                {"seed": r.seed, "rho_sq": r.rho_sq, "retest_corr": r.retest_corr, "cond_cov": r.cond_cov}
                for r in self.per_seed_rows
            ],
            "failed_seeds": [{"seed": s, "reason": why} for s, why in self.failed_seeds],
        }

    def to_text(self) -> str:
        row = [
            f"split-{self.method.value}",
            f"{self.cond_cov_mean:.2e}",
            fmt_pm(self.rho_sq_mean, self.rho_sq_std),
            fmt_pm(self.retest_corr_mean, self.retest_corr_std),
        ]
        text = render_table(["method", "E[Cov(Y1,Y2|X)]", "rho-Perfect^2", "Corr(Y1,Y2)"], [row])
        text += f"\n({len(self.per_seed_rows)} of {self.num_seeds} seeds succeeded)"
        return text


def _one_seed(table, method, seed, policy):
    pair = split(table, method, seed)
    try:
        est = rho_perfect(pair.first, policy)
        retest = test_retest_corr(pair)
        ccov = pair_conditional_cov(pair).value
    except CannotSplit:
        raise
    except RhoPerfectError as exc:
        return seed, None, f"{type(exc).__name__}: {exc}"
    return seed, SeedRow(seed, est.rho_sq, retest, ccov), None


def run_validation(
    table: RatingsTable,
    method,
    seeds,
    jobs: int = 1,
    policy: DegeneratePolicy = DegeneratePolicy.DROP,
) -> ValidationReport:
    """rho-Perfect^2 of the first half vs the realized split correlation, per seed."""
    method = SplitMethod(method)
    seeds = sorted(int(s) for s in seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(lambda s: _one_seed(table, method, s, policy), seeds))
    else:
        results = [_one_seed(table, method, s, policy) for s in seeds]

    rows = [r for _, r, _ in results if r is not None]
    failed = [(s, why) for s, r, why in results if r is None]
    if not rows:
        raise DegenerateVariance(f"every seed failed; first failure: {failed[0][1]}")
    rho_m, rho_s = mean_std([r.rho_sq for r in rows])
    ret_m, ret_s = mean_std([r.retest_corr for r in rows])
    cc_m, cc_s = mean_std([r.cond_cov for r in rows])
    return ValidationReport(method, len(seeds), rho_m, rho_s, ret_m, ret_s, cc_m, cc_s, rows, failed)
