"""Classical reliability measures used as points of comparison.

ICC(2,k) assumes every item is rated by the same number k of raters, so
unbalanced tables are balanced first by seeded subsampling of each item's
ratings down to k = min m_i; column positions then act as pseudo-raters.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import DegeneratePolicy, RatingsTable, _item_means, drop_single_rated, pearson_corr, rho_perfect
from .errors import CannotBalance, CannotSplit, DegenerateVariance, RhoPerfectError, TooFewItems
from .report import fmt_pm, mean_std, render_table
from .rng import derive_seed, stream
from .split import split_raters, test_retest_corr

BALANCING_NOTE = (
    "ICC(2,k) computed on the first split half after dropping items with < 2 ratings and "
    "balancing by seeded subsampling of each item's ratings to k = min m_i; "
    "column positions are treated as pseudo-raters"
)


@dataclass
class IccResult:
    icc: float
    n: int
    k: int
    ms_rows: float
    ms_cols: float
    ms_error: float
    ss_total: float
    ss_rows: float
    ss_cols: float
    ss_error: float


def icc2k_matrix(x) -> IccResult:
    """ICC(2,k) of a balanced n x k matrix (two-way random effects, absolute agreement)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, k = x.shape
    if n < 2:
        raise TooFewItems(f"ICC needs >= 2 items, got {n}")
    if k < 2:
        raise CannotBalance(f"ICC needs >= 2 ratings per item, got k={k}")
    grand = x.mean()
    row_m = x.mean(axis=1)
    col_m = x.mean(axis=0)
    ss_total = float(np.sum((x - grand) ** 2))
    ss_rows = float(k * np.sum((row_m - grand) ** 2))
    ss_cols = float(n * np.sum((col_m - grand) ** 2))
    resid = x - row_m[:, None] - col_m[None, :] + grand
    ss_error = float(np.sum(resid**2))

    ms_r = ss_rows / (n - 1)
    ms_c = ss_cols / (k - 1)
    ms_e = ss_error / ((n - 1) * (k - 1))
    denom = ms_r + (ms_c - ms_e) / n
    if denom <= 0.0:
        raise DegenerateVariance("ICC denominator is not positive")
    return IccResult((ms_r - ms_e) / denom, n, k, ms_r, ms_c, ms_e, ss_total, ss_rows, ss_cols, ss_error)


def balance(table: RatingsTable, seed: int) -> np.ndarray:
    """n x k matrix: each item's ratings subsampled (seeded, in random order) to k = min m_i."""
    if table.n == 0:
        raise TooFewItems("empty table")
    k = int(table.counts.min())
    if k < 2:
        raise CannotBalance(f"smallest item has {k} rating(s); ICC needs k >= 2")
    rows = []
    for it in table.items:
        pick = stream(seed, "icc-balance", it.item_id).choice(it.m, k, replace=False)
        rows.append(it.values[pick])
    return np.vstack(rows)


def icc2k_detail(table: RatingsTable, seed: int) -> IccResult:
    table, _ = drop_single_rated(table, DegeneratePolicy.DROP)
    return icc2k_matrix(balance(table, seed))


def icc2k(table: RatingsTable, seed: int) -> float:
    return icc2k_detail(table, seed).icc


def subsampling_reliability(table: RatingsTable, iterations: int, seed: int) -> float:
    """Mean correlation between item means of a random rater half and of all ratings.

    Each iteration draws half the rater pool, correlates the drawn-half item
    means with the full-table item means over items the half has rated, and the
    correlations are averaged. The drawn ratings are part of the full set, which
    is why this measure runs high.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    raters = table.rater_ids()
    if len(raters) < 2:
        raise CannotSplit(f"subsampling needs at least 2 raters, found {len(raters)}")
    full = _item_means(table)
    codes, idx, vals = table.flat_rater_codes, table.flat_index, table.flat_values
    half = (len(raters) + 1) // 2

    corrs = []
    for it in range(iterations):
        drawn = np.zeros(len(raters), dtype=bool)
        drawn[stream(seed, "subsample", it).permutation(len(raters))[:half]] = True
        sel = drawn[codes]
        cnt = np.bincount(idx[sel], minlength=table.n)
        ok = cnt > 0
        if ok.sum() < 2:
            warnings.warn(f"subsampling iteration {it}: fewer than 2 items rated by the drawn half", RuntimeWarning)
            continue
        sub = np.bincount(idx[sel], weights=vals[sel], minlength=table.n)[ok] / cnt[ok]
        try:
            corrs.append(pearson_corr(sub, full[ok]))
        except DegenerateVariance as exc:
            warnings.warn(f"subsampling iteration {it} skipped: {exc}", RuntimeWarning)
    if not corrs:
        raise DegenerateVariance("every subsampling iteration was degenerate")
    return math.fsum(corrs) / len(corrs)


@dataclass
class ComparisonRow:
    seed: int
    retest_corr: float
    icc2k: float
    icc_k: int
    subsampling: float
    rho_sq: float


@dataclass
class ComparisonReport:
    retest_corr: tuple[float, float]
    icc2k: tuple[float, float]
    subsampling: tuple[float, float]
    rho_sq: tuple[float, float]
    num_seeds: int
    balancing_note: str
    per_seed_rows: list[ComparisonRow] = field(default_factory=list)
    failed_seeds: list[tuple[int, str]] = field(default_factory=list)

    def to_dict(self):
        return {
            "retest_corr": list(self.retest_corr),
            "icc2k": list(self.icc2k),
            "subsampling": list(self.subsampling),
            "rho_sq": list(self.rho_sq),
            "num_seeds": self.num_seeds,
            "balancing_note": self.balancing_note,
            "per_seed_rows": [asdict(r) for r in self.per_seed_rows],
            "failed_seeds": [{"seed": s, "reason": why} for s, why in self.failed_seeds],
        }

    def to_text(self) -> str:
        row = [fmt_pm(*self.retest_corr), fmt_pm(*self.icc2k), fmt_pm(*self.subsampling), fmt_pm(*self.rho_sq)]
        text = render_table(["Corr(Y1,Y2)", "ICC(2,k)", "Subsampling", "rho-Perfect^2"], [row])
        return text + f"\n({len(self.per_seed_rows)} of {self.num_seeds} seeds succeeded)\n{self.balancing_note}"


def _compare_seed(table, seed, iterations):
    pair = split_raters(table, seed)
    first = pair.first
    try:
        retest = test_retest_corr(pair)
        icc = icc2k_detail(first, derive_seed(seed, "icc"))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sub = subsampling_reliability(first, iterations, derive_seed(seed, "subsample"))
        rho = rho_perfect(first)
    except CannotSplit:
        raise
    except RhoPerfectError as exc:
        return seed, None, f"{type(exc).__name__}: {exc}"
    return seed, ComparisonRow(seed, retest, icc.icc, icc.k, sub, rho.rho_sq), None


def compare_report(table: RatingsTable, seeds, subsample_iterations: int = 10, jobs: int = 1) -> ComparisonReport:
    """Split raters per seed; score all baselines on the first half only."""
    seeds = sorted(int(s) for s in seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(lambda s: _compare_seed(table, s, subsample_iterations), seeds))
    else:
        results = [_compare_seed(table, s, subsample_iterations) for s in seeds]
    rows = [r for _, r, _ in results if r is not None]
    failed = [(s, why) for s, r, why in results if r is None]
    if not rows:
        raise DegenerateVariance(f"every seed failed; first failure: {failed[0][1]}")
    return ComparisonReport(
        retest_corr=mean_std([r.retest_corr for r in rows]),
        icc2k=mean_std([r.icc2k for r in rows]),
        subsampling=mean_std([r.subsampling for r in rows]),
        rho_sq=mean_std([r.rho_sq for r in rows]),
        num_seeds=len(seeds),
        balancing_note=BALANCING_NOTE,
        per_seed_rows=rows,
        failed_seeds=failed,
    )
