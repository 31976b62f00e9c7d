"""
SleepFS Experiment Module
Runs every (selector ensemble x regressor) cell of a config and writes the report files
"""

import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, List, Optional, Tuple

from tqdm import tqdm

from .core import CHART_TEMPLATE, RESULTS_FILE, TABLE_FILE, detail, info, is_quiet, slugify, staged_output, success
from .data import Dataset, describe, generate_synthetic, load_csv, standardize, train_test_split
from .errors import ConfigError
from .evaluation import (RegressorSpec, SelectorSpec, cross_validate, fit_fold_selectors, fit_pipeline,
                         fit_training_selector, forest_params)
from .regress import fit_forest
from .report import ExperimentResult, TableFormat, render_importance_chart, render_table, write_results_json
from .selection import SelectorModel
from .settings import ExperimentConfig, validate_against


@dataclass(frozen=True)
class ExperimentOutcome:
    results: Tuple[ExperimentResult, ...]
    charts: Dict[str, Dict[str, float]]
    files: Tuple[str, ...]


def load_dataset(config: ExperimentConfig) -> Dataset:
    """Load the CSV or draw the synthetic dataset a config names"""
    source = config.dataset
    if source.synthetic is not None:
        ds, support = generate_synthetic(source.synthetic)
        info(f"Generated synthetic dataset (support {list(support)})")
        return ds
    ds = load_csv(source.csv_path, source.target_column)
    info(f"Loaded {os.path.basename(source.csv_path)}")
    return ds


@dataclass(frozen=True)
class EnsembleSelectors:
    """One ensemble's selectors, fitted once and shared by every regressor"""
    folds: Tuple[SelectorModel, ...]
    final: SelectorModel


def fit_ensemble_selectors(train: Dataset, ensemble: SelectorSpec,
                           config: ExperimentConfig) -> EnsembleSelectors:
    final = fit_training_selector(train, ensemble, config.target_scaling, config.seed, config.n_jobs)
    if config.global_selection:
        return EnsembleSelectors((final,) * config.cv_folds, final)
    folds = fit_fold_selectors(train, ensemble, config.cv_folds, config.seed,
                               config.target_scaling, config.n_jobs)
    return EnsembleSelectors(folds, final)


def run_cell(train: Dataset, test: Dataset, ensemble: SelectorSpec, regressor: RegressorSpec,
             config: ExperimentConfig, selectors: Optional[EnsembleSelectors] = None) -> ExperimentResult:
    """Cross-validate on the training split, then refit on it and score the held-out split"""
    if selectors is None:
        selectors = fit_ensemble_selectors(train, ensemble, config)
    cv = cross_validate(train, ensemble, regressor, config.cv_folds, config.seed,
                        config.target_scaling, n_jobs=config.n_jobs, fold_selectors=selectors.folds)
    pipeline = fit_pipeline(train, ensemble, regressor, config.target_scaling, config.seed, config.n_jobs,
                            selectors.final)
    metrics = pipeline.evaluate(test)
    return ExperimentResult(
        selector_label=ensemble.label,
        regressor_label=regressor.display_label,
        cv=cv,
        test_rmse=metrics.rmse,
        r_squared=metrics.r_squared,
        selected_feature_names=pipeline.selected_names,
        importances=pipeline.importances(),
    )


def overall_importances(train: Dataset, regressor: RegressorSpec, config: ExperimentConfig) -> Dict[str, float]:
    """Forest importances over every original feature of the training split"""
    standardized, _ = standardize(train)
    params = forest_params(regressor.params, config.n_jobs, config.seed)
    model = fit_forest(standardized.features, standardized.target, params)
    return {name: float(v) for name, v in zip(train.feature_names, model.importances)}


def run_experiment(config: ExperimentConfig, out_dir: str) -> ExperimentOutcome:
    """
    Execute the experiment and write results.json, table.md and one chart per forest regressor

    Files are staged and only moved into out_dir once everything succeeded.

    Args:
        config: Validated experiment config
        out_dir: Output directory

    Returns:
        ExperimentOutcome

    Raises:
        ConfigError: If the config does not fit the loaded dataset
        SleepFSError: Any failure while fitting or writing
    """
    ds = load_dataset(config)
    for line in describe(ds):
        detail(line)
    problems = validate_against(config, ds.n_samples, ds.n_features)
    if problems:
        raise ConfigError("; ".join(problems))

    train, test = train_test_split(ds, config.test_fraction, config.seed)
    info(f"Split {train.n_samples} train / {test.n_samples} test rows")

    n_cells = len(config.selector_ensembles) * len(config.regressors)
    results: List[ExperimentResult] = []
    with tqdm(total=n_cells, desc="Experiment cells", unit="cell", disable=is_quiet()) as progress:
        for ensemble in config.selector_ensembles:
            started = time.perf_counter()
            selectors = fit_ensemble_selectors(train, ensemble, config)
            detail(f"{ensemble.label}: selectors fitted ({time.perf_counter() - started:.2f}s)")
            for regressor in config.regressors:
                started = time.perf_counter()
                result = run_cell(train, test, ensemble, regressor, config, selectors)
                elapsed = time.perf_counter() - started
                results.append(result)
                detail(f"{ensemble.label} x {result.regressor_label}: CV RMSE {result.cv.mean:.4f}, "
                       f"test RMSE {result.test_rmse:.4f}, R2 {result.r_squared:.4f} ({elapsed:.2f}s)")
                progress.update(1)

    charts: Dict[str, Dict[str, float]] = {}
    for regressor in config.regressors:
        if regressor.kind == "forest":
            charts[slugify(regressor.display_label)] = overall_importances(train, regressor, config)

    metadata = {
        "seed": config.seed,
        "config_digest": config.digest,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    written = []
    with staged_output(out_dir) as staging:
        write_results_json(results, metadata, os.path.join(staging, RESULTS_FILE))
        with open(os.path.join(staging, TABLE_FILE), "w", encoding="utf-8", newline="\n") as f:
            f.write(render_table(results, TableFormat.MARKDOWN))
        written += [RESULTS_FILE, TABLE_FILE]
        for slug, importances in charts.items():
            name = CHART_TEMPLATE.format(label=slug)
            render_importance_chart(importances, os.path.join(staging, name))
            written.append(name)

    success(f"Wrote {len(written)} files to {out_dir}")
    return ExperimentOutcome(tuple(results), charts, tuple(written))
