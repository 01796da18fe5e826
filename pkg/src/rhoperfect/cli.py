"""``rho-perfect`` command line.

Subcommands: compute, validate, compare, subset-report, synth, generate.
JSON output is the stable contract; ``--format table`` is for humans.
Exit codes: 0 ok, 2 parse error, 3 degenerate statistics, 4 cannot split,
5 bad synthetic spec.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings

from . import __version__
from .baselines import compare_report
from .core import DegeneratePolicy, rho_perfect
from .errors import RhoPerfectError
from .ingest import MOVIELENS, ColumnMapping, IngestOptions, PredictionColumns, parse_long, parse_predictions_csv, write_long_csv
from .report import ReportEnvelope, options_hash, render_table
from .split import SplitMethod, run_validation
from .subsets import subset_report
from .synth import generate, load_spec, oracle_check

SEED_ENV = "RHOPERFECT_SEED"


def _col(v: str | None):
    if v is None:
        return None
    return int(v) if v.isdigit() else v


def _ingest_options(args) -> IngestOptions:
    base = MOVIELENS if args.movielens else ColumnMapping()
    cols = ColumnMapping(
        item=_col(args.item_col) if args.item_col is not None else base.item,
        rater=_col(args.rater_col) if args.rater_col is not None else base.rater,
        value=_col(args.value_col) if args.value_col is not None else base.value,
        condition=_col(args.condition_col),
    )
    return IngestOptions(
        min_ratings_per_item=args.min_ratings,
        per_rater_aggregate=args.per_rater_mean,
        columns=cols,
        delimiter=args.delimiter,
        header=not args.no_header,
        fail_fast=args.fail_fast,
    )


def _option_dict(args, skip=("func", "format", "output", "jobs")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _seeds(args) -> list[int]:
    return list(range(args.seed, args.seed + args.num_seeds))


def _envelope(args, command, paths, seeds, body_type, body, warnings_=()) -> ReportEnvelope:
    opts = _option_dict(args)
    return ReportEnvelope(
        command=command,
        inputs={"paths": [str(p) for p in paths], "options": opts, "options_hash": options_hash(opts)},
        seeds=list(seeds),
        body_type=body_type,
        body=body,
        warnings=list(warnings_),
    )


def _load(args):
    table, stats = parse_long(args.ratings, _ingest_options(args))
    msgs = []
    if stats.rows_rejected:
        first = stats.rejections[0]
        msgs.append(
            {"code": "RowsRejected", "detail": f"{stats.rows_rejected} row(s) rejected; first at line {first[0]}: {first[1]}",
             "affected_count": stats.rows_rejected}
        )
    if stats.items_dropped:
        msgs.append(
            {"code": "ItemsBelowMinRatings", "detail": f"{stats.items_dropped} item(s) below --min-ratings dropped",
             "affected_count": stats.items_dropped}
        )
    return table, stats, msgs


def cmd_compute(args):
    table, stats, msgs = _load(args)
    policy = DegeneratePolicy.STRICT if args.strict else DegeneratePolicy.DROP
    est = rho_perfect(table, policy)
    body = est.to_dict()
    body["ingest"] = stats.to_dict()
    env = _envelope(args, "compute", [args.ratings], [], "RhoEstimate", body, msgs)
    text = render_table(
        ["quantity", "value"],
        [
            ["rho-Perfect", f"{est.rho:.6f}"],
            ["rho-Perfect^2", f"{est.rho_sq:.6f}"],
            ["Var(Y)", f"{est.var_y:.6g}"],
            ["E[Var(Y|X)]", f"{est.expected_cond_var:.6g}"],
            ["Var(Yhat) raw", f"{est.var_yhat_raw:.6g}"],
            ["clamped", str(est.clamped)],
            ["items", str(est.n_items)],
            ["ratings", str(est.n_ratings)],
        ],
    )
    return env, _with_warnings(text, env)


def cmd_validate(args):
    table, _, msgs = _load(args)
    seeds = _seeds(args)
    methods = [SplitMethod.RATERS, SplitMethod.RATINGS] if args.method == "both" else [SplitMethod(args.method)]
    reports = [run_validation(table, m, seeds, jobs=args.jobs) for m in methods]
    if len(reports) == 1:
        body, body_type = reports[0].to_dict(), "ValidationReport"
    else:
        body, body_type = {"reports": [r.to_dict() for r in reports]}, "ValidationReportList"
    env = _envelope(args, "validate", [args.ratings], seeds, body_type, body, msgs)
    return env, _with_warnings("\n\n".join(r.to_text() for r in reports), env)


def cmd_compare(args):
    table, _, msgs = _load(args)
    seeds = _seeds(args)
    rep = compare_report(table, seeds, args.subsample_iters, jobs=args.jobs)
    env = _envelope(args, "compare", [args.ratings], seeds, "ComparisonReport", rep.to_dict(), msgs)
    return env, _with_warnings(rep.to_text(), env)


def cmd_subset_report(args):
    table, _, msgs = _load(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        preds = parse_predictions_csv(
            args.predictions, PredictionColumns(_col(args.pred_item_col), _col(args.pred_col)), args.delimiter
        )
    msgs += [{"code": "Predictions", "detail": str(w.message), "affected_count": 0} for w in caught]
    rep = subset_report(table, preds, by_condition=args.by_condition)
    env = _envelope(args, "subset-report", [args.ratings, args.predictions], [], "SubsetReport", rep.to_dict(), msgs)
    return env, _with_warnings(rep.to_text(), env)


def cmd_synth(args):
    spec = load_spec(args.spec)
    res = oracle_check(spec, args.trials, jobs=args.jobs)
    body = res.to_dict()
    body["spec"] = spec.to_dict()
    env = _envelope(args, "synth", [args.spec], [spec.seed], "OracleResult", body)
    text = render_table(
        ["quantity", "value"],
        [
            ["trials", str(res.trials)],
            ["mean estimated rho", f"{res.estimated_rho_mean:.6f} ± {res.estimated_rho_std:.6f}"],
            ["closed-form rho", f"{res.true_rho:.6f}"],
            ["abs gap", f"{res.abs_gap:.6f}"],
        ],
    )
    return env, text


def cmd_generate(args):
    spec = load_spec(args.spec)
    table, truth = generate(spec)
    write_long_csv(table, args.out)
    if args.truth:
        with open(args.truth, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["item", "mu", "sigma", "m"])
            w.writeheader()
            for row in truth.to_rows():
                w.writerow({**row, "mu": repr(row["mu"]), "sigma": repr(row["sigma"])})
    body = {"items": table.n, "ratings": table.total_ratings, "ratings_path": args.out, "truth_path": args.truth}
    env = _envelope(args, "generate", [args.spec], [spec.seed], "GenerateResult", body)
    return env, f"wrote {table.total_ratings} ratings for {table.n} items to {args.out}"


def _with_warnings(text: str, env: ReportEnvelope) -> str:
    ws = list(env.warnings) + list(env.body.get("warnings", []) if isinstance(env.body, dict) else [])
    if ws:
        text += "\n\nwarnings:\n" + "\n".join(f"  [{w['code']}] {w['detail']}" for w in ws)
    return text


def _add_ingest(p):
    g = p.add_argument_group("input")
    g.add_argument("ratings", help="long-format ratings file (.csv or .jsonl)")
    g.add_argument("--item-col")
    g.add_argument("--rater-col")
    g.add_argument("--value-col")
    g.add_argument("--condition-col")
    g.add_argument("--movielens", action="store_true", help="MovieLens ratings.csv column names")
    g.add_argument("--delimiter", default=",")
    g.add_argument("--no-header", action="store_true", help="columns are given as zero-based positions")
    g.add_argument("--min-ratings", type=int, default=2, help="drop items with fewer ratings (default 2)")
    g.add_argument("--per-rater-mean", action="store_true", help="average repeated ratings by one rater on one item")
    g.add_argument("--fail-fast", action="store_true", help="abort on the first malformed row")


def _add_seeds(p):
    p.add_argument("--seed", type=int, default=int(os.environ.get(SEED_ENV, 0)))
    p.add_argument("--num-seeds", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rho-perfect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "table"], default="json")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--jobs", type=int, default=1, help="worker threads; results do not depend on it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", parents=[common], help="rho-Perfect of a ratings file")
    _add_ingest(p)
    p.add_argument("--strict", action="store_true", help="error on items with fewer than 2 ratings instead of dropping")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("validate", parents=[common], help="split-based test-retest check")
    _add_ingest(p)
    p.add_argument("--method", choices=["raters", "ratings", "both"], default="both")
    _add_seeds(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare", parents=[common], help="rho-Perfect^2 vs ICC(2,k) and subsampling reliability")
    _add_ingest(p)
    _add_seeds(p)
    p.add_argument("--subsample-iters", type=int, default=10)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("subset-report", parents=[common], help="model PCC vs rho-Perfect per condition")
    _add_ingest(p)
    p.add_argument("predictions", help="CSV with item and prediction columns")
    p.add_argument("--pred-item-col", default="item")
    p.add_argument("--pred-col", default="prediction")
    p.add_argument("--by-condition", action="store_true", help="add one row per condition tag")
    p.set_defaults(func=cmd_subset_report)

    p = sub.add_parser("synth", parents=[common], help="oracle check on synthetic data from a JSON/TOML spec")
    p.add_argument("spec")
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic ratings file (and ground truth)")
    p.add_argument("spec")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="also write per-item mu, sigma, m")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        env, text = args.func(args)
    except RhoPerfectError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    out = env.to_json() if args.format == "json" else text + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
