"""`holpscreen` command-line interface.

Subcommands: ``screen`` (rank one dataset), ``campaign`` (config-driven
Monte Carlo), ``cv`` (k-fold cross-validation on a CSV), ``heatmap``
(projection-matrix heatmap) and ``timing`` (runtime curves).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .. import metrics, screeners
from ..exceptions import ConfigError, IngestError
from ..modelselect import EbicSized, PipelineSpec
from ..screeners import TopD
from ..simgen import Family, SimScenario, simulate_dataset
from .config import METHOD_TOKENS, ExperimentConfig, run_campaign
from .figures import emit_curves, emit_heatmap
from .ingest import load_csv

_FAMILY_TOKENS = {f.value: f for f in Family}


def _add_method_flags(sub, default="holp"):
    sub.add_argument(
        "--method", choices=sorted(METHOD_TOKENS), default=default,
        help="screening method",
    )
    sub.add_argument("--ridge", type=float, default=10.0,
                     help="ridge parameter for ridge-holp")
    sub.add_argument("--partitions", type=int, default=2,
                     help="partition count for divide-holp")


def _method_params(args) -> dict:
    method = METHOD_TOKENS[args.method]
    if method == "ridge_holp":
        return {"ridge": args.ridge}
    if method == "divide_holp":
        return {"partitions": args.partitions, "seed": args.seed}
    return {}


def _screen_scores(method, x, y, d, params):
    if method == "holp":
        return screeners.holp_scores(x, y)
    if method == "ridge_holp":
        return screeners.ridge_holp_scores(x, y, r=params["ridge"])
    if method == "sis":
        return screeners.sis_scores(x, y)
    if method == "rrcs":
        return screeners.rrcs_scores(x, y)
    if method == "forward_regression":
        return screeners.forward_regression_rank(x, y, d)
    raise ConfigError(f"method {method!r} cannot produce a ranked list")


def _cmd_screen(args) -> int:
    data = load_csv(
        args.csv,
        args.response,
        variance_filter_top_k=args.top_variance,
        standardize=args.standardize,
    )
    n, p = data.x.shape
    method = METHOD_TOKENS[args.method]
    if args.d is not None:
        d = args.d
    else:
        d = min(n - 1, p) if method == "forward_regression" else min(n, p)
    params = _method_params(args)

    if method == "divide_holp":
        # block-wise selection exposes an order, not a global score
        selection = screeners.divide_holp_scores(
            data.x, data.y, m=args.partitions, d=d, seed=args.seed
        )
        ranked = [(int(j), None) for j in selection.indices]
    else:
        scores = _screen_scores(method, data.x, data.y, d, params)
        if args.gamma is not None:
            selection = screeners.threshold_select(scores, args.gamma)
        else:
            selection = screeners.rank_select(scores, d)
        ranked = [(int(j), float(scores.scores[j])) for j in selection.indices]

    rows = [
        {"rank": r + 1, "index": j, "name": data.names[j],
         "score": "" if s is None else repr(s)}
        for r, (j, s) in enumerate(ranked)
    ]
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["rank", "index", "name", "score"], lineterminator="\n"
            )
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {out} ({len(rows)} predictors)")
    else:
        for row in rows:
            score = row["score"]
            shown = f"{float(score):.6g}" if score else ""
            print(f"{row['rank']:>5}  {row['name']:<24} {shown}")
    return 0


def _cmd_campaign(args) -> int:
    config = ExperimentConfig.load(args.config, seed=args.seed, threads=args.threads)
    return run_campaign(config, args.out)


def _cmd_cv(args) -> int:
    data = load_csv(
        args.csv,
        args.response,
        variance_filter_top_k=args.top_variance,
        standardize=args.standardize,
    )
    n, p = data.x.shape
    method = METHOD_TOKENS[args.method]
    train_n = n - (n // args.folds) - 1
    if args.ebic_dmax is not None:
        rule = EbicSized(args.ebic_dmax)
    else:
        d = args.d if args.d is not None else max(1, min(p, train_n - 2))
        rule = TopD(d)
    pipeline = PipelineSpec(
        screener=method,
        rule=rule,
        refiner=args.refiner.replace("-", "_"),
        screener_params=_method_params(args),
    )
    result = metrics.kfold_cv(data.x, data.y, pipeline, k=args.folds, seed=args.seed)
    print(f"folds used     : {result.folds_used}/{args.folds}")
    print(f"mean CV MSE    : {result.mean_mse:.6g}")
    print(f"sd CV MSE      : {result.sd_mse:.6g}")
    print(f"median size    : {result.median_size:g}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["method", "refiner", "folds", "mean_mse", "sd_mse", "median_size"])
            writer.writerow(
                [args.method, args.refiner, result.folds_used,
                 repr(result.mean_mse), repr(result.sd_mse), repr(result.median_size)]
            )
        print(f"wrote {out}")
    return 0


def _cmd_heatmap(args) -> int:
    scenario = SimScenario(
        family=_FAMILY_TOKENS[args.family],
        n=args.n,
        p=args.p,
        r_squared=0.5,  # irrelevant: only the design matrix is used
        rho=args.rho,
        k=args.k,
        delta2=args.delta2,
        seed=args.seed,
    )
    ds = simulate_dataset(scenario, 0)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0xC015)))
    cols = np.sort(rng.choice(args.p, size=min(args.columns, args.p), replace=False))
    if args.matrix == "projection":
        m = screeners.projection_submatrix(ds.x, cols)
        title = "projection X'(XX')^{-1}X (sampled columns)"
    else:
        sub = ds.x[:, cols]
        m = sub.T @ sub
        title = "Gram X'X (sampled columns)"
    out = emit_heatmap(m, args.out, title=title)
    ratio = metrics.dominance_ratio(m)
    print(f"wrote {out} (dominance ratio {ratio:.2f})")
    return 0


def _cmd_timing(args) -> int:
    grid = [int(v) for v in args.grid.split(",")]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = []
    rows = []
    for token in args.methods.split(","):
        token = token.strip()
        if token not in METHOD_TOKENS:
            raise ConfigError(f"unknown method token {token!r}")
        method = METHOD_TOKENS[token]
        table = metrics.timing_run(
            method,
            grid,
            axis=args.axis,
            n=args.n,
            p=args.p,
            d=args.d,
            repeats=args.repeats,
            seed=args.seed,
        )
        for row in table:
            rows.append({"method": token, "size": row["size"], "seconds": row["seconds"]})
        series.append((token, [r["size"] for r in table], [r["seconds"] for r in table]))
    csv_path = out_dir / "timing.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "size", "seconds"])
        for row in rows:
            writer.writerow([row["method"], row["size"], repr(row["seconds"])])
    emit_curves(
        series,
        out_dir / "timing.svg",
        title=f"median screening time vs {args.axis}",
        xlabel=args.axis,
        ylabel="seconds",
    )
    print(f"wrote {csv_path} and {out_dir / 'timing.svg'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holpscreen",
        description="Variable screening and Monte-Carlo benchmarks for p >> n regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("screen", help="rank the predictors of one CSV dataset")
    sc.add_argument("csv", help="input CSV file (header row required)")
    sc.add_argument("--response", required=True, help="response column name")
    _add_method_flags(sc)
    group = sc.add_mutually_exclusive_group()
    group.add_argument("--d", type=int, default=None, help="submodel size (default n)")
    group.add_argument("--gamma", type=float, default=None, help="score threshold")
    sc.add_argument("--top-variance", type=int, default=None,
                    help="keep only the K highest-variance predictors")
    sc.add_argument("--standardize", action="store_true",
                    help="standardize predictors after ingestion")
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--out", default=None, help="write the ranked list as CSV")
    sc.set_defaults(func=_cmd_screen)

    ca = sub.add_parser("campaign", help="run a config-driven experiment campaign")
    ca.add_argument("--config", required=True, help="experiment config (JSON)")
    ca.add_argument("--out", default="out", help="output directory")
    ca.add_argument("--threads", type=int, default=None, help="worker threads")
    ca.add_argument("--seed", type=int, default=None, help="override the global seed")
    ca.set_defaults(func=_cmd_campaign)

    cv = sub.add_parser("cv", help="k-fold cross-validation of a pipeline on a CSV")
    cv.add_argument("csv")
    cv.add_argument("--response", required=True)
    _add_method_flags(cv)
    cv.add_argument("--refiner", choices=["none", "lasso-ebic", "ols"],
                    default="lasso-ebic")
    group = cv.add_mutually_exclusive_group()
    group.add_argument("--d", type=int, default=None,
                       help="screened submodel size (default: training fold size - 2)")
    group.add_argument("--ebic-dmax", type=int, default=None,
                       help="pick the submodel size by EBIC up to this cap")
    cv.add_argument("--folds", type=int, default=10)
    cv.add_argument("--top-variance", type=int, default=None)
    cv.add_argument("--standardize", action="store_true")
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--out", default=None, help="write a one-row summary CSV")
    cv.set_defaults(func=_cmd_cv)

    hm = sub.add_parser("heatmap", help="screening-matrix heatmap for a simulated design")
    hm.add_argument("--out", default="heatmap.svg")
    hm.add_argument("--matrix", choices=["projection", "gram"], default="projection")
    hm.add_argument("--family", choices=sorted(_FAMILY_TOKENS), default="independent")
    hm.add_argument("--rho", type=float, default=None)
    hm.add_argument("--k", type=int, default=None)
    hm.add_argument("--delta2", type=float, default=None)
    hm.add_argument("--n", type=int, default=50)
    hm.add_argument("--p", type=int, default=1000)
    hm.add_argument("--columns", type=int, default=200,
                    help="number of sampled predictor columns")
    hm.add_argument("--seed", type=int, default=0)
    hm.set_defaults(func=_cmd_heatmap)

    tm = sub.add_parser("timing", help="median screening runtime over a size grid")
    tm.add_argument("--methods", default="holp,sis",
                    help="comma-separated method tokens")
    tm.add_argument("--axis", choices=["p", "d"], default="p")
    tm.add_argument("--grid", default="500,1000,1500,2000,2500",
                    help="comma-separated grid values")
    tm.add_argument("--n", type=int, default=100)
    tm.add_argument("--p", type=int, default=1000, help="fixed p for the d axis")
    tm.add_argument("--d", type=int, default=50, help="fixed d for the p axis")
    tm.add_argument("--repeats", type=int, default=5)
    tm.add_argument("--seed", type=int, default=0)
    tm.add_argument("--out", default="out")
    tm.set_defaults(func=_cmd_timing)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IngestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
