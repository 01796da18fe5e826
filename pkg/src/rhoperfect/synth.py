"""Synthetic rating datasets with a known perfect predictor.

Each item i gets a latent mean mu_i, a noise scale sigma_i and a rating count
m_i; its ratings are mu_i + eps_ij with eps_ij i.i.d., mean zero, std sigma_i.
Then E[Y|X=x_i] = mu_i and Var(Y|X=x_i) = sigma_i^2 / m_i, so the ceiling is
known in closed form and the estimator can be checked against it.
"""

from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Item, Rating, RatingsTable, rho_perfect
from .errors import DegenerateVariance, SpecError
from .report import mean_std
from .rng import derive_seed, stream

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

NOISE_FAMILIES = ("gaussian", "uniform")


@dataclass(frozen=True)
class Dist:
    """``constant`` (value ``low``), ``uniform`` on [low, high), or ``randint`` on [low, high]."""

    kind: str
    low: float
    high: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "uniform", "randint"):
            raise SpecError(f"unknown distribution kind {self.kind!r}")
        if self.kind != "constant":
            if self.high is None or self.high < self.low:
                raise SpecError(f"{self.kind} needs low <= high, got ({self.low}, {self.high})")

    @property
    def support(self) -> tuple[float, float]:
        return (self.low, self.low if self.kind == "constant" else self.high)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, float(self.low))
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, n)
        return rng.integers(int(self.low), int(self.high), n, endpoint=True)

    @classmethod
    def parse(cls, obj, integer=False) -> Dist:
        if isinstance(obj, Dist):
            return obj
        if isinstance(obj, (int, float)) and not isinstance(obj, bool):
            return cls("constant", obj)
        if isinstance(obj, (list, tuple)) and len(obj) == 2:
            return cls("randint" if integer else "uniform", obj[0], obj[1])
        if isinstance(obj, dict):
            try:
                return cls(obj["kind"], obj["low"], obj.get("high"))
            except KeyError as exc:
                raise SpecError(f"distribution missing field {exc}") from None
        raise SpecError(f"cannot interpret distribution {obj!r}")


@dataclass(frozen=True)
class SynthSpec:
    num_items: int = 2000
    ratings_per_item: Dist = Dist("randint", 3, 20)
    latent_mean_dist: Dist = Dist("uniform", 1.0, 5.0)
    noise_sigma_dist: Dist = Dist("uniform", 0.2, 1.5)
    noise_family: str = "gaussian"
    seed: int = 0
    num_raters: int = 200
    # clip + round to an integer scale; breaks the closed form, demos only
    realistic: bool = False
    scale: tuple[float, float] = (1.0, 5.0)

    def __post_init__(self):
        if self.num_items < 2:
            raise SpecError("num_items must be >= 2")
        if self.ratings_per_item.kind == "uniform":
            raise SpecError("ratings_per_item must be constant or randint")
        lo, hi = self.ratings_per_item.support
        if lo < 2 or int(lo) != lo or int(hi) != hi:
            raise SpecError("ratings_per_item must be integers >= 2")
        if self.noise_sigma_dist.support[0] < 0:
            raise SpecError("noise sigma must be non-negative")
        if self.noise_family not in NOISE_FAMILIES:
            raise SpecError(f"noise_family must be one of {NOISE_FAMILIES}")
        if self.num_raters < hi:
            raise SpecError(f"num_raters={self.num_raters} is smaller than the largest rating count {int(hi)}")

    @classmethod
    def from_dict(cls, d: dict) -> SynthSpec:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown spec fields: {sorted(extra)}")
        kw = dict(d)
        try:
            if "ratings_per_item" in kw:
                kw["ratings_per_item"] = Dist.parse(kw["ratings_per_item"], integer=True)
            for k in ("latent_mean_dist", "noise_sigma_dist"):
                if k in kw:
                    kw[k] = Dist.parse(kw[k])
            if "scale" in kw:
                kw["scale"] = tuple(kw["scale"])
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise SpecError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scale"] = list(self.scale)
        return d


def load_spec(path) -> SynthSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".toml":
            d = tomllib.loads(text)
        else:
            d = json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise SpecError(f"malformed spec {path}: {exc}") from None
    if not isinstance(d, dict):
        raise SpecError("spec must be a mapping")
    return SynthSpec.from_dict(d)


@dataclass
class GroundTruth:
    item_ids: list[str]
    mu: np.ndarray
    sigma: np.ndarray
    m: np.ndarray

    def to_rows(self):
        return [
            {"item": i, "mu": float(a), "sigma": float(s), "m": int(k)}
            for i, a, s, k in zip(self.item_ids, self.mu, self.sigma, self.m)
        ]


def generate(spec: SynthSpec) -> tuple[RatingsTable, GroundTruth]:
    rng = stream(spec.seed, "synth")
    n = spec.num_items
    mu = spec.latent_mean_dist.sample(rng, n)
    sigma = spec.noise_sigma_dist.sample(rng, n)
    m = spec.ratings_per_item.sample(rng, n).astype(np.int64)

    total = int(m.sum())
    if spec.noise_family == "gaussian":
        eps = rng.standard_normal(total)
    else:
        eps = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), total)
    idx = np.repeat(np.arange(n), m)
    values = mu[idx] + sigma[idx] * eps
    if spec.realistic:
        values = np.clip(np.rint(values), *spec.scale)

    ids = [f"s{i:06d}" for i in range(n)]
    items = []
    start = 0
    for i in range(n):
        k = int(m[i])
        raters = rng.choice(spec.num_raters, k, replace=False)
        vals = values[start : start + k].tolist()
        items.append(Item(ids[i], tuple(Rating(f"u{r:05d}", v) for r, v in zip(raters.tolist(), vals))))
        start += k
    scale = spec.scale if spec.realistic else None
    return RatingsTable(tuple(items), scale), GroundTruth(ids, mu, sigma, m)


def true_rho(truth: GroundTruth) -> float:
    """sqrt(Var(mu) / (Var(mu) + mean(sigma^2 / m))) with population moments."""
    var_mu = float(np.var(truth.mu))
    noise = float(np.mean(truth.sigma**2 / truth.m))
    if var_mu + noise <= 0.0:
        raise DegenerateVariance("ground truth has zero total variance")
    return math.sqrt(var_mu / (var_mu + noise))


@dataclass
class OracleResult:
    estimated_rho_mean: float
    estimated_rho_std: float
    true_rho: float
    abs_gap: float
    trials: int
    var_yhat_raw_mean: float
    var_mu_mean: float
    per_trial: list[dict] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _trial(spec: SynthSpec, t: int) -> dict:
    sub = replace(spec, seed=derive_seed(spec.seed, "trial", t))
    table, truth = generate(sub)
    est = rho_perfect(table)
    return {
        "trial": t,
        "seed": sub.seed,
        "rho": est.rho,
        "true_rho": true_rho(truth),
        "var_yhat_raw": est.var_yhat_raw,
        "var_mu": float(np.var(truth.mu, ddof=1)),
    }


def oracle_check(spec: SynthSpec, trials: int, jobs: int = 1) -> OracleResult:
    """Mean estimated rho over independent generations vs the closed-form value.

    ``true_rho`` is the mean of each realization's closed-form ceiling.
    """
    if trials < 1:
        raise SpecError("trials must be >= 1")
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            rows = list(ex.map(lambda t: _trial(spec, t), range(trials)))
    else:
        rows = [_trial(spec, t) for t in range(trials)]
    est_m, est_s = mean_std([r["rho"] for r in rows])
    true_m = math.fsum(r["true_rho"] for r in rows) / trials
    return OracleResult(
        estimated_rho_mean=est_m,
        estimated_rho_std=est_s,
        true_rho=true_m,
        abs_gap=abs(est_m - true_m),
        trials=trials,
        var_yhat_raw_mean=math.fsum(r["var_yhat_raw"] for r in rows) / trials,
        var_mu_mean=math.fsum(r["var_mu"] for r in rows) / trials,
        per_trial=rows,
    )
