"""
SleepFS Evaluation Module
Metrics, the leakage-safe selector + regressor pipeline and k-fold cross-validation
"""

import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .data import Dataset, Standardizer, TargetScaler, fit_standardizer, kfold
from .errors import DegenerateTarget, ParamError, ShapeError
from .linalg import as_vector
from .regress import (ForestModel, ForestParams, Model, fit_forest, fit_lasso, fit_mean,
                      fit_ols, fit_ridge, predict)
from .selection import (EnsembleStrategy, MiEstimatorConfig, SelectorModel, chi_squared_scores,
                        ensemble_combine, f_regression_scores, forest_importance_scores,
                        identity_selector, lasso_importance_scores, make_cv_scorer,
                        mutual_info_scores, pca_fit, rfe_fit, select_k_best, selector_transform)

REGRESSOR_KINDS = ("linear", "ridge", "lasso", "forest", "mean")
TECHNIQUE_KINDS = ("identity", "kbest", "rfe", "pca")
KBEST_SCORES = ("f_regression", "mutual_info", "chi2", "lasso", "forest")


@dataclass(frozen=True)
class MetricReport:
    mse: float
    rmse: float
    r_squared: float


@dataclass(frozen=True)
class CvSummary:
    """Per-fold RMSE with its mean and population std"""
    fold_rmse: Tuple[float, ...]
    mean: float
    std: float
    fold_selected: Tuple[Tuple[str, ...], ...] = ()
    fold_r_squared: Tuple[float, ...] = ()

    @classmethod
    def from_folds(cls, fold_rmse, fold_selected=(), fold_r_squared=()) -> "CvSummary":
        values = np.asarray(fold_rmse, dtype=np.float64)
        return cls(
            fold_rmse=tuple(float(v) for v in values),
            mean=float(values.mean()),
            std=float(values.std()),
            fold_selected=tuple(tuple(names) for names in fold_selected),
            fold_r_squared=tuple(float(v) for v in fold_r_squared),
        )


@dataclass(frozen=True)
class TechniqueSpec:
    """One selection technique; params are validated by settings"""
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SelectorSpec:
    label: str
    techniques: Tuple[TechniqueSpec, ...] = ()
    strategy: EnsembleStrategy = EnsembleStrategy.CHAIN
    k: Optional[int] = None


@dataclass(frozen=True)
class RegressorSpec:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)
    label: str = ""

    @property
    def display_label(self) -> str:
        return self.label or self.kind


# ========== Metrics ==========

def _pair(y_true, y_pred) -> Tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.ndim != 1 or y_true.shape != y_pred.shape:
        raise ShapeError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.shape[0] == 0:
        raise ShapeError("metrics need at least one value")
    return y_true, y_pred


def mse(y_true, y_pred) -> float:
    """(1/n) sum (y_i - yhat_i)^2"""
    y_true, y_pred = _pair(y_true, y_pred)
    residual = y_true - y_pred
    return float(np.mean(residual * residual))


def rmse(y_true, y_pred) -> float:
    return math.sqrt(mse(y_true, y_pred))


def r_squared(y_true, y_pred) -> float:
    """
    1 - SS_res / SS_tot; negative when worse than predicting the mean

    Raises:
        DegenerateTarget: If y_true is constant
    """
    y_true, y_pred = _pair(y_true, y_pred)
    centred = y_true - y_true.mean()
    ss_tot = float(centred @ centred)
    if ss_tot == 0.0:
        raise DegenerateTarget("R-squared is undefined for a constant target")
    residual = y_true - y_pred
    return 1.0 - float(residual @ residual) / ss_tot


def evaluate(y_true, y_pred) -> MetricReport:
    error = mse(y_true, y_pred)
    return MetricReport(mse=error, rmse=math.sqrt(error), r_squared=r_squared(y_true, y_pred))


def format_fixed(value: float) -> str:
    """Two decimals, round-half-even on the shortest decimal repr; never '-0.00'"""
    rounded = Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)
    if rounded == 0:
        rounded = abs(rounded)
    return f"{rounded:.2f}"


def format_cv(summary: CvSummary) -> str:
    """Render as 'M.MM +/- S.SS'"""
    return f"{format_fixed(summary.mean)} +/- {format_fixed(summary.std)}"


# ========== Fitting from specs ==========

def fit_regressor(spec: RegressorSpec, X: np.ndarray, y: np.ndarray, n_jobs: int = 1,
                  seed: int = 42) -> Model:
    """Fit the regressor a spec names"""
    params = spec.params
    if spec.kind == "linear":
        return fit_ols(X, y)
    if spec.kind == "ridge":
        return fit_ridge(X, y, params.get("lambda", 1.0))
    if spec.kind == "lasso":
        return fit_lasso(X, y, params.get("lambda", 0.1), params.get("tol", 1e-8),
                         params.get("max_iter", 10000))
    if spec.kind == "forest":
        return fit_forest(X, y, forest_params(params, n_jobs, seed))
    if spec.kind == "mean":
        return fit_mean(X, y)
    raise ParamError(f"unknown regressor kind {spec.kind!r}")


def forest_params(params: Dict[str, Any], n_jobs: int = 1, seed: int = 42) -> ForestParams:
    """An explicit "seed" param wins over the experiment seed"""
    return ForestParams(
        n_trees=params.get("n_trees", 100),
        max_depth=params.get("max_depth"),
        min_samples_leaf=params.get("min_samples_leaf", 1),
        features_per_split=params.get("features_per_split"),
        bootstrap=params.get("bootstrap", True),
        seed=params.get("seed", seed),
        n_jobs=n_jobs,
    )


def _default_k(d: int) -> int:
    return math.ceil(d / 2)


def fit_technique(technique: TechniqueSpec, ds: Dataset, seed: int = 42,
                  n_jobs: int = 1) -> SelectorModel:
    """Fit one selection technique on (already standardised) data"""
    params = technique.params
    d = ds.n_features
    if technique.kind == "identity":
        return identity_selector(d)
    if technique.kind == "kbest":
        score = params.get("score", "f_regression")
        if score == "f_regression":
            scores = f_regression_scores(ds)
        elif score == "mutual_info":
            scores = mutual_info_scores(ds, MiEstimatorConfig(bins=params.get("bins")))
        elif score == "chi2":
            scores = chi_squared_scores(ds, params.get("target_bins", 5), params.get("feature_bins", 5))
        elif score == "lasso":
            scores = lasso_importance_scores(ds, params.get("lambda", 0.1))
        elif score == "forest":
            scores = forest_importance_scores(ds, forest_params(params, n_jobs, seed))
        else:
            raise ParamError(f"unknown kbest score {score!r}")
        return select_k_best(scores, params.get("k", _default_k(d)))
    if technique.kind == "rfe":
        estimator = RegressorSpec(params.get("estimator", "linear"), params.get("estimator_params", {}))
        scorer = make_cv_scorer(lambda X, y: fit_regressor(estimator, X, y, seed=seed))
        n_select = params.get("n_select", _default_k(d))
        return rfe_fit(ds, n_select, scorer, params.get("inner_folds", 3), seed, n_jobs)
    if technique.kind == "pca":
        return pca_fit(ds, params.get("k", d))
    raise ParamError(f"unknown selection technique {technique.kind!r}")


def fit_selector(spec: SelectorSpec, ds: Dataset, seed: int = 42, n_jobs: int = 1) -> SelectorModel:
    """
    Fit every technique of an ensemble and combine them

    Chain members are fitted one after another on the running output;
    majority-vote members are each fitted on ds.
    """
    if not spec.techniques:
        return identity_selector(ds.n_features)
    members = []
    current = ds
    for technique in spec.techniques:
        source = current if spec.strategy is EnsembleStrategy.CHAIN else ds
        member = fit_technique(technique, source, seed, n_jobs)
        members.append(member)
        if spec.strategy is EnsembleStrategy.CHAIN:
            current = source.with_features(selector_transform(member, source.features),
                                           member.output_names(source.feature_names))
    return ensemble_combine(members, spec.strategy, spec.k)


# ========== Pipeline ==========

@dataclass(frozen=True)
class FittedPipeline:
    """
    Standardise -> (scale target) -> select -> regress, every statistic from training data

    predict() answers in original target units; predict_scaled() and
    evaluate() work in the modelling space where reported metrics live.
    """
    standardizer: Standardizer
    target_scaler: Optional[TargetScaler]
    selector: SelectorModel
    regressor: Model
    feature_names: Tuple[str, ...]
    selected_names: Tuple[str, ...]

    def transform(self, X) -> np.ndarray:
        return selector_transform(self.selector, self.standardizer.apply(X))

    def predict_scaled(self, X) -> np.ndarray:
        return predict(self.regressor, self.transform(X))

    def predict(self, X) -> np.ndarray:
        scaled = self.predict_scaled(X)
        return self.target_scaler.inverse(scaled) if self.target_scaler else scaled

    def scale_target(self, y) -> np.ndarray:
        y = as_vector(y, name="y")
        return self.target_scaler.apply(y) if self.target_scaler else y

    def evaluate(self, ds: Dataset) -> MetricReport:
        return evaluate(self.scale_target(ds.target), self.predict_scaled(ds.features))

    def importances(self) -> Optional[Dict[str, float]]:
        """Forest importances keyed by selected-feature name, None for other regressors"""
        if not isinstance(self.regressor, ForestModel):
            return None
        return {name: float(v) for name, v in zip(self.selected_names, self.regressor.importances)}


def _prepare_training(train: Dataset, target_scaling: bool
                      ) -> Tuple[Standardizer, Optional[TargetScaler], Dataset]:
    standardizer = fit_standardizer(train.features)
    scaler = TargetScaler.fit(train.target) if target_scaling else None
    y = scaler.apply(train.target) if scaler else train.target
    prepared = Dataset(standardizer.apply(train.features), y, train.feature_names,
                       train.target_name, train.provenance)
    return standardizer, scaler, prepared


def fit_pipeline(train: Dataset, selector_spec: SelectorSpec, regressor_spec: RegressorSpec,
                 target_scaling: bool = True, seed: int = 42, n_jobs: int = 1,
                 selector: Optional[SelectorModel] = None) -> FittedPipeline:
    """
    Fit the full pipeline on training data only

    Args:
        train: Training data in original units
        selector_spec: Selection ensemble to fit
        regressor_spec: Regressor to fit on the selected features
        target_scaling: Min-max scale the target to [0, 1]
        seed: Seed for stochastic selectors and forest regressors
        n_jobs: joblib workers for inner loops
        selector: Already fitted selector to reuse instead of fitting selector_spec

    Returns:
        FittedPipeline
    """
    standardizer, scaler, prepared = _prepare_training(train, target_scaling)
    if selector is None:
        selector = fit_selector(selector_spec, prepared, seed, n_jobs)
    elif selector.n_features_in != prepared.n_features:
        raise ShapeError(f"selector fitted on {selector.n_features_in} features, data has {prepared.n_features}")
    X = selector_transform(selector, prepared.features)
    regressor = fit_regressor(regressor_spec, X, prepared.target, n_jobs, seed)
    return FittedPipeline(
        standardizer=standardizer,
        target_scaler=scaler,
        selector=selector,
        regressor=regressor,
        feature_names=train.feature_names,
        selected_names=selector.output_names(train.feature_names),
    )


def fit_training_selector(train: Dataset, selector_spec: SelectorSpec, target_scaling: bool = True,
                          seed: int = 42, n_jobs: int = 1) -> SelectorModel:
    """The selector fit_pipeline would fit on these rows, without a regressor"""
    _, _, prepared = _prepare_training(train, target_scaling)
    return fit_selector(selector_spec, prepared, seed, n_jobs)


def fit_global_selector(ds: Dataset, selector_spec: SelectorSpec, target_scaling: bool = True,
                        seed: int = 42, n_jobs: int = 1) -> SelectorModel:
    """Fit the selector once on the whole dataset (the naive, leaky protocol)"""
    return fit_training_selector(ds, selector_spec, target_scaling, seed, n_jobs)


def fit_fold_selectors(ds: Dataset, selector_spec: SelectorSpec, k: int = 5, seed: int = 42,
                       target_scaling: bool = True, n_jobs: int = 1) -> Tuple[SelectorModel, ...]:
    """
    Fit the selector on each fold's training rows of kfold(n, k, seed)

    The result can be handed to cross_validate for every regressor of an
    ensemble; each fold's selector still sees only that fold's training rows.
    """
    plan = kfold(ds.n_samples, k, seed)
    subsets = [ds.subset(plan.train_indices(f)) for f in range(k)]
    if n_jobs == 1:
        return tuple(fit_training_selector(s, selector_spec, target_scaling, seed) for s in subsets)
    return tuple(Parallel(n_jobs=n_jobs)(
        delayed(fit_training_selector)(s, selector_spec, target_scaling, seed) for s in subsets
    ))


def _run_fold(ds: Dataset, train_rows, test_rows, selector_spec, regressor_spec,
              target_scaling, seed, n_jobs, selector):
    pipeline = fit_pipeline(ds.subset(train_rows), selector_spec, regressor_spec,
                            target_scaling, seed, n_jobs, selector)
    test = ds.subset(test_rows)
    y_true = pipeline.scale_target(test.target)
    y_pred = pipeline.predict_scaled(test.features)
    try:
        fold_r2 = r_squared(y_true, y_pred)
    except DegenerateTarget:
        fold_r2 = float("nan")
    return rmse(y_true, y_pred), pipeline.selected_names, fold_r2


def cross_validate(ds: Dataset, selector_spec: SelectorSpec, regressor_spec: RegressorSpec,
                   k: int = 5, seed: int = 42, target_scaling: bool = True,
                   global_selection: bool = False, n_jobs: int = 1,
                   fold_selectors: Optional[Sequence[SelectorModel]] = None) -> CvSummary:
    """
    k-fold cross-validated RMSE

    Every fold refits the whole pipeline (selector included) on its k-1
    training folds unless global_selection is set or fold_selectors (one
    per fold, from fit_fold_selectors with the same k and seed) are given.

    Returns:
        CvSummary: fold RMSEs in fold order, their mean and population std
    """
    plan = kfold(ds.n_samples, k, seed)
    if fold_selectors is not None:
        if global_selection:
            raise ParamError("global_selection and fold_selectors are mutually exclusive")
        if len(fold_selectors) != k:
            raise ParamError(f"need one selector per fold, got {len(fold_selectors)} for k={k}")
        selectors = list(fold_selectors)
    elif global_selection:
        selectors = [fit_global_selector(ds, selector_spec, target_scaling, seed, n_jobs)] * k
    else:
        selectors = [None] * k
    jobs = [(plan.train_indices(f), plan.test_indices(f), selectors[f]) for f in range(k)]
    if n_jobs == 1:
        folds = [_run_fold(ds, tr, te, selector_spec, regressor_spec, target_scaling, seed, 1, sel)
                 for tr, te, sel in jobs]
    else:
        folds = Parallel(n_jobs=n_jobs)(
            delayed(_run_fold)(ds, tr, te, selector_spec, regressor_spec, target_scaling, seed, 1, sel)
            for tr, te, sel in jobs
        )
    return CvSummary.from_folds(
        [f[0] for f in folds], [f[1] for f in folds], [f[2] for f in folds]
    )
