"""Split validation and baseline comparison on synthetic regimes.

Prints, per regime, rho-Perfect^2 against the split-half test-retest
correlation for both split methods, then the same retest correlation next to
ICC(2,k) and subsampling reliability.

    python scripts/synthetic_tables.py --seeds 10
"""

import argparse

from rhoperfect.baselines import compare_report
from rhoperfect.split import run_validation
from rhoperfect.synth import Dist, SynthSpec, generate

REGIMES = {
    "dense (m=3..20)": SynthSpec(num_items=2000, seed=1),
    "movielens-like (m=5..100)": SynthSpec(
        num_items=1000,
        ratings_per_item=Dist("randint", 5, 100),
        noise_sigma_dist=Dist("uniform", 0.5, 2.0),
        num_raters=400,
        seed=2,
    ),
    "noisy MOS (m=17..30)": SynthSpec(
        num_items=1500,
        ratings_per_item=Dist("randint", 17, 30),
        latent_mean_dist=Dist("uniform", 2.5, 3.5),
        noise_sigma_dist=Dist("uniform", 1.7, 2.6),
        realistic=True,
        seed=3,
    ),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--subsample-iters", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    seeds = range(args.seeds)
    for name, spec in REGIMES.items():
        table, _ = generate(spec)
        print(f"== {name}: {table.n} items, {table.total_ratings} ratings")
        for method in ("raters", "ratings"):
            print(run_validation(table, method, seeds, jobs=args.jobs).to_text())
        print(compare_report(table, seeds, args.subsample_iters, jobs=args.jobs).to_text())
        print()


if __name__ == "__main__":
    main()
