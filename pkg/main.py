"""
SleepFS Command-Line Application
Feature-selection and regression benchmarking: run experiments, generate data, score features
"""

import argparse
import json
import math
import sys
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

from src.core import APP_VERSION, error, info, set_quiet, success
from src.data import SyntheticSpec, generate_synthetic, load_csv, standardize
from src.errors import ConfigError, SleepFSError
from src.evaluation import RegressorSpec, fit_regressor
from src.experiment import run_experiment
from src.report import write_dataset_csv
from src.selection import (MiEstimatorConfig, chi_squared_scores, f_regression_scores,
                           make_cv_scorer, mutual_info_scores, pca_fit, rfe_fit)
from src.settings import load_config

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

SCORE_METHODS = ("f-regression", "mutual-info", "chi2", "rfe", "pca")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sleepfs",
        description="Feature selection + regression benchmarking on the sleep-stress dataset",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", required=True, help="experiment config (JSON)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--global-selection", action="store_true",
                     help="fit selectors once on the whole training split instead of per fold")
    run.add_argument("--jobs", type=int, help="joblib workers (-1 = all cores)")
    run.add_argument("--quiet", action="store_true", help="only print warnings and errors")

    generate = commands.add_parser("generate", help="write a synthetic dataset with known support")
    generate.add_argument("--n", type=int, required=True, help="rows")
    generate.add_argument("--d", type=int, required=True, help="features")
    generate.add_argument("--coef", required=True, help="comma-separated coefficients, one per feature")
    generate.add_argument("--noise", type=float, default=0.0, help="noise standard deviation")
    generate.add_argument("--seed", type=int, default=42)
    generate.add_argument("--out", required=True, help="CSV path")
    generate.add_argument("--quiet", action="store_true")

    score = commands.add_parser("score", help="score features of a CSV with one technique")
    score.add_argument("--data", required=True, help="CSV path")
    score.add_argument("--target", required=True, help="target column")
    score.add_argument("--method", required=True, choices=SCORE_METHODS)
    score.add_argument("--k", type=int, help="features kept by rfe / components for pca")
    score.add_argument("--bins", type=int, help="mutual-info bins (default min(10, sqrt(n)))")
    score.add_argument("--seed", type=int, default=42)
    score.add_argument("--jobs", type=int, default=1)
    score.add_argument("--quiet", action="store_true")
    return parser


# ========== Commands ==========

def cmd_run(args: argparse.Namespace) -> int:
    """Run every (ensemble x regressor) cell of a config and write the report files"""
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(f"--seed must be >= 0, got {args.seed}")
            config = replace(config, seed=args.seed)
        if args.global_selection:
            config = replace(config, global_selection=True)
        if args.jobs is not None:
            if args.jobs == 0:
                raise ConfigError("--jobs must be non-zero")
            config = replace(config, n_jobs=args.jobs)
    except ConfigError as e:
        error(f"{args.config}: {e}")
        return EXIT_USAGE

    try:
        outcome = run_experiment(config, args.out)
    except ConfigError as e:
        error(f"{args.config}: {e}")
        return EXIT_USAGE
    except (SleepFSError, OSError) as e:
        error(str(e))
        return EXIT_RUNTIME
    success(f"{len(outcome.results)} result cells")
    return EXIT_OK


def _parse_coefficients(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ValueError(f"--coef must be comma-separated numbers, got {text!r}")


def cmd_generate(args: argparse.Namespace) -> int:
    """Write a synthetic CSV plus a <out>.support.json sidecar naming the true support"""
    try:
        spec = SyntheticSpec(args.n, args.d, _parse_coefficients(args.coef), args.noise, args.seed)
        ds, support = generate_synthetic(spec)
    except (SleepFSError, ValueError) as e:
        error(str(e))
        return EXIT_USAGE

    sidecar = f"{args.out}.support.json"
    try:
        write_dataset_csv(ds, args.out)
        with open(sidecar, "w", encoding="utf-8", newline="\n") as f:
            json.dump({
                "feature_names": list(ds.feature_names),
                "coefficients": list(spec.true_coefficients),
                "support": list(support),
                "noise_sd": spec.noise_sd,
                "seed": spec.seed,
            }, f, indent=2, sort_keys=True)
            f.write("\n")
    except (SleepFSError, OSError) as e:
        error(str(e))
        return EXIT_RUNTIME
    success(f"Wrote {ds.n_samples} rows to {args.out} (support {list(support)})")
    return EXIT_OK


def score_features(args: argparse.Namespace) -> Tuple[str, List[Tuple[str, float]]]:
    """
    Score every feature of the CSV with the requested method

    Returns:
        tuple: (value column header, [(name, value)] sorted by value descending)
    """
    ds = load_csv(args.data, args.target)
    info(f"Loaded {ds.n_samples} rows, {ds.n_features} features")
    standardized, _ = standardize(ds)
    names = ds.feature_names

    if args.method == "pca":
        k = args.k if args.k is not None else ds.n_features
        model = pca_fit(standardized, k)
        rows = [(f"PC{j + 1}", v) for j, v in enumerate(model.variance_explained)]
        return "variance_explained_pct", rows
    if args.method == "f-regression":
        scores = f_regression_scores(standardized).scores
    elif args.method == "mutual-info":
        scores = mutual_info_scores(standardized, MiEstimatorConfig(bins=args.bins)).scores
    elif args.method == "chi2":
        scores = chi_squared_scores(standardized).scores
    else:
        n_select = args.k if args.k is not None else math.ceil(ds.n_features / 2)
        linear = RegressorSpec("linear")
        scorer = make_cv_scorer(lambda X, y: fit_regressor(linear, X, y))
        model = rfe_fit(standardized, n_select, scorer, 3, args.seed, args.jobs)
        rounds = len(model.elimination_order)
        survived = {f: i for i, f in enumerate(model.elimination_order)}
        scores = [survived.get(f, rounds) for f in range(ds.n_features)]
        header = "rounds_survived"
        rows = sorted(zip(names, (float(s) for s in scores)), key=lambda r: -r[1])
        return header, rows
    rows = sorted(zip(names, (float(s) for s in scores)), key=lambda r: -r[1])
    return args.method.replace("-", "_"), rows


def cmd_score(args: argparse.Namespace) -> int:
    """Print a two-column feature/score table to standard output"""
    try:
        header, rows = score_features(args)
    except (SleepFSError, ValueError) as e:
        error(str(e))
        return EXIT_USAGE
    width = max(len("feature"), *(len(name) for name, _ in rows))
    print(f"{'feature':<{width}}  {header}")
    for name, value in rows:
        print(f"{name:<{width}}  {value:.6f}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "generate": cmd_generate, "score": cmd_score}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    set_quiet(getattr(args, "quiet", False))
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
