import json
import math

import numpy as np
import pytest

from oracles import monte_carlo_ceiling
from rhoperfect.core import rho_perfect
from rhoperfect.errors import DegenerateVariance, SpecError
from rhoperfect.split import split_ratings, test_retest_corr
from rhoperfect.synth import Dist, GroundTruth, SynthSpec, generate, load_spec, oracle_check, true_rho

# tolerances chosen from scripts/oracle_pilot.py (10 repeats of 20 trials each):
# observed max |gap| 0.0004 (n=2000), 0.007 (rho^2~0.28), 0.0022 (n=50)
SOMOS_LIKE = SynthSpec(
    num_items=2000,
    ratings_per_item=Dist("randint", 17, 30),
    latent_mean_dist=Dist("uniform", 2.5, 3.5),
    noise_sigma_dist=Dist("uniform", 1.7, 2.6),
    seed=31,
)


def test_generate_deterministic():
    spec = SynthSpec(num_items=100, seed=9)
    a, ta = generate(spec)
    b, tb = generate(spec)
    assert a == b
    assert np.array_equal(ta.mu, tb.mu)


def test_generate_contract():
    table, truth = generate(SynthSpec(num_items=2000, ratings_per_item=Dist("randint", 3, 20), seed=2))
    assert table.n == 2000 == len(truth.mu) == len(truth.sigma) == len(truth.m)
    assert table.counts.min() >= 3 and table.counts.max() <= 20
    assert np.array_equal(table.counts, truth.m)
    for it in table.items[:50]:
        assert len(set(it.rater_ids)) == it.m


def test_near_zero_noise():
    spec = SynthSpec(num_items=200, noise_sigma_dist=Dist("constant", 1e-9), seed=4)
    table, truth = generate(spec)
    assert rho_perfect(table).rho == pytest.approx(1.0, abs=1e-9)
    assert true_rho(truth) == pytest.approx(1.0, abs=1e-12)


def test_true_rho_closed_form():
    truth = GroundTruth(["a", "b"], np.array([0.0, 2.0]), np.array([0.0, 0.0]), np.array([3, 3]))
    assert true_rho(truth) == 1.0
    # Var(mu) = 1 (population), sigma^2 / m = 1
    truth = GroundTruth(["a", "b"], np.array([0.0, 2.0]), np.array([2.0, 2.0]), np.array([4, 4]))
    assert true_rho(truth) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    with pytest.raises(DegenerateVariance):
        true_rho(GroundTruth(["a"], np.array([1.0, 1.0]), np.zeros(2), np.array([2, 2])))


def test_true_rho_monotone():
    base = GroundTruth(list("abcd"), np.array([1.0, 2, 3, 5]), np.array([0.5, 1, 1, 2]), np.array([4, 4, 6, 8]))
    r0 = true_rho(base)
    for i in range(4):
        s = base.sigma.copy()
        s[i] *= 1.5
        assert true_rho(GroundTruth(base.item_ids, base.mu, s, base.m)) < r0
        m = base.m.copy()
        m[i] += 3
        assert true_rho(GroundTruth(base.item_ids, base.mu, base.sigma, m)) > r0


def test_true_rho_matches_monte_carlo():
    _, truth = generate(SynthSpec(num_items=300, ratings_per_item=Dist("randint", 2, 6),
                                  noise_sigma_dist=Dist("uniform", 0.5, 2.5), seed=12))
    mc = monte_carlo_ceiling(truth.mu, truth.sigma, truth.m, reps=40, seed=1)
    assert mc == pytest.approx(true_rho(truth), abs=0.01)


def test_oracle_moderate_noise():
    spec = SynthSpec(num_items=2000, ratings_per_item=Dist("constant", 8), seed=21)
    assert oracle_check(spec, 20).abs_gap <= 0.01


@pytest.mark.slow
def test_oracle_extreme_noise():
    res = oracle_check(SOMOS_LIKE, 20)
    assert 0.24 <= res.true_rho**2 <= 0.32
    assert res.abs_gap <= 0.02


def test_oracle_small_n():
    res = oracle_check(SynthSpec(num_items=50, seed=41), 20)
    assert res.abs_gap <= 0.05


def test_oracle_unbiased_variance():
    res = oracle_check(SynthSpec(num_items=2000, seed=51), 20)
    assert res.var_yhat_raw_mean == pytest.approx(res.var_mu_mean, rel=0.01)


def test_oracle_uniform_noise_family():
    res = oracle_check(SynthSpec(num_items=2000, noise_family="uniform", seed=61), 10)
    assert res.abs_gap <= 0.01


def test_split_chain_end_to_end():
    table, truth = generate(SynthSpec(num_items=2000, ratings_per_item=Dist("constant", 10), seed=71))
    corr = np.mean([test_retest_corr(split_ratings(table, s)) for s in range(10)])
    half = GroundTruth(truth.item_ids, truth.mu, truth.sigma, truth.m // 2)
    assert corr == pytest.approx(true_rho(half) ** 2, abs=0.01)


def test_realistic_mode_discretizes():
    table, _ = generate(SynthSpec(num_items=50, realistic=True, seed=3))
    vals = table.flat_values
    assert vals.min() >= 1 and vals.max() <= 5
    assert np.all(vals == np.rint(vals))
    assert table.scale_hint == (1.0, 5.0)


@pytest.mark.parametrize(
    "bad",
    [
        {"num_items": 1},
        {"ratings_per_item": 1},
        {"noise_family": "cauchy"},
        {"noise_sigma_dist": {"kind": "uniform", "low": -1, "high": 1}},
        {"latent_mean_dist": {"kind": "beta", "low": 0, "high": 1}},
        {"ratings_per_item": [3, 500]},
        {"bogus": 1},
    ],
)
def test_spec_errors(bad):
    with pytest.raises(SpecError):
        SynthSpec.from_dict(bad)


def test_spec_from_json_and_toml(tmp_path):
    d = {"num_items": 120, "ratings_per_item": [3, 9], "noise_sigma_dist": [0.1, 0.4], "seed": 5}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    spec = load_spec(p)
    assert spec.ratings_per_item == Dist("randint", 3, 9)
    assert spec.noise_sigma_dist == Dist("uniform", 0.1, 0.4)
    t = tmp_path / "s.toml"
    t.write_text('num_items = 120\nratings_per_item = [3, 9]\nnoise_sigma_dist = [0.1, 0.4]\nseed = 5\n')
    assert load_spec(t) == spec
    assert SynthSpec.from_dict(spec.to_dict()) == spec
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SpecError):
        load_spec(bad)
