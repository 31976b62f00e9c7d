"""
SleepFS Feature Selection Module
Univariate scorers, SelectKBest, PCA, recursive feature elimination and selector ensembles
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .data import Dataset, FoldPlan, constant_columns, kfold
from .errors import (DegenerateTarget, InsufficientSamples, ParamError, ShapeError,
                     StrategyError)
from .linalg import as_matrix, covariance, eig_symmetric
from .regress import ForestParams, fit_forest, fit_lasso, predict


class ScoreMethod(Enum):
    F_REGRESSION = "f_regression"
    MUTUAL_INFO = "mutual_info"
    CHI_SQUARED = "chi2"
    LASSO_COEFFICIENTS = "lasso"
    FOREST_IMPORTANCE = "forest"


class SelectorKind(Enum):
    IDENTITY = "identity"
    KBEST = "kbest"
    RFE = "rfe"
    PCA = "pca"
    ENSEMBLE = "ensemble"


class EnsembleStrategy(Enum):
    CHAIN = "chain"
    MAJORITY_VOTE = "majority_vote"


class BinStrategy(Enum):
    EQUAL_FREQUENCY = "equal_frequency"


@dataclass(frozen=True)
class FeatureScores:
    """One score per feature; larger is more relevant"""
    scores: np.ndarray
    method: ScoreMethod

    def ranking(self) -> np.ndarray:
        """Rank per feature, 0 = highest score, ties to the lower index"""
        order = np.argsort(-self.scores, kind="stable")
        ranks = np.empty_like(order)
        ranks[order] = np.arange(order.shape[0])
        return ranks


@dataclass(frozen=True)
class MiEstimatorConfig:
    """bins=None resolves to min(10, floor(sqrt(n)))"""
    bins: Optional[int] = None
    strategy: BinStrategy = BinStrategy.EQUAL_FREQUENCY

    def resolve_bins(self, n: int) -> int:
        bins = self.bins if self.bins is not None else min(10, math.isqrt(n))
        if bins < 2:
            raise InsufficientSamples(f"{n} samples are too few for a 2-bin MI estimate")
        return bins


@dataclass(frozen=True)
class SelectorModel:
    """
    A fitted feature-selection transform

    Index-based kinds (identity, kbest, rfe, majority-vote ensembles) keep
    columns of the input; pca projects onto the top-k eigenvectors; a chain
    ensemble applies its steps in order.
    """
    kind: SelectorKind
    n_features_in: int
    kept_indices: Optional[Tuple[int, ...]] = None
    ranking: Optional[Tuple[int, ...]] = None
    projection: Optional[np.ndarray] = None
    means: Optional[np.ndarray] = None
    variance_explained: Optional[Tuple[float, ...]] = None
    eigenvalues: Optional[Tuple[float, ...]] = None
    elimination_order: Tuple[int, ...] = ()
    steps: Tuple["SelectorModel", ...] = ()

    @property
    def is_index_based(self) -> bool:
        return self.kept_indices is not None

    @property
    def n_features_out(self) -> int:
        if self.steps:
            return self.steps[-1].n_features_out
        if self.kept_indices is not None:
            return len(self.kept_indices)
        return self.projection.shape[1]

    def output_names(self, feature_names: Sequence[str]) -> Tuple[str, ...]:
        """Names of the transformed columns given the input names"""
        if len(feature_names) != self.n_features_in:
            raise ShapeError(f"{len(feature_names)} names for a selector fitted on {self.n_features_in}")
        if self.steps:
            names = tuple(feature_names)
            for step in self.steps:
                names = step.output_names(names)
            return names
        if self.kept_indices is not None:
            return tuple(feature_names[i] for i in self.kept_indices)
        return tuple(f"PC{j + 1}" for j in range(self.projection.shape[1]))


def _index_model(kind: SelectorKind, d: int, kept: Sequence[int],
                 ranking: Optional[Sequence[int]] = None, **extra) -> SelectorModel:
    kept = tuple(sorted(int(i) for i in kept))
    if not kept:
        raise ParamError("a selector must keep at least one feature")
    if kept[0] < 0 or kept[-1] >= d or len(set(kept)) != len(kept):
        raise ParamError(f"kept indices {kept} invalid for {d} features")
    if ranking is None:
        rest = [i for i in range(d) if i not in kept]
        ranks = np.empty(d, dtype=int)
        ranks[list(kept) + rest] = np.arange(d)
        ranking = ranks
    return SelectorModel(kind=kind, n_features_in=d, kept_indices=kept,
                         ranking=tuple(int(r) for r in ranking), **extra)


# ========== Binning ==========

def equal_frequency_bins(values: np.ndarray, bins: int) -> np.ndarray:
    """
    Discretise into at most `bins` equal-frequency bins

    Cut points are order statistics, so any strictly increasing transform of
    the values yields the same codes. Bin i holds (edge[i-1], edge[i]]; bins
    left empty by ties are merged and codes are renumbered 0..k-1.
    """
    values = np.asarray(values, dtype=np.float64)
    quantiles = np.linspace(0.0, 1.0, bins + 1)[1:-1]
    edges = np.quantile(values, quantiles, method="lower")
    codes = np.searchsorted(edges, values, side="left")
    _, compact = np.unique(codes, return_inverse=True)
    return compact.reshape(-1)


def _entropy(counts: np.ndarray) -> float:
    counts = counts[counts > 0]
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


# ========== Scoring Functions ==========

def f_regression_scores(ds: Dataset) -> FeatureScores:
    """
    Univariate F statistic per feature, F = r^2 / (1 - r^2) * (n - 2)

    r is the Pearson correlation of the feature with the target; constant
    features score 0.

    Raises:
        InsufficientSamples: If n < 3
        DegenerateTarget: If the target is constant
    """
    n = ds.n_samples
    if n < 3:
        raise InsufficientSamples(f"f-regression needs at least 3 samples, got {n}")
    y = ds.target
    if constant_columns(y.reshape(-1, 1))[0]:
        raise DegenerateTarget("target is constant; F statistic undefined")
    X = ds.features
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = np.sum(Xc * Xc, axis=0)
    syy = float(yc @ yc)
    sxy = Xc.T @ yc
    constant = constant_columns(X)
    safe_sxx = np.where(constant, 1.0, sxx)
    r2 = np.where(constant, 0.0, sxy ** 2 / (safe_sxx * syy))
    r2 = np.clip(r2, 0.0, 1.0)
    scores = r2 / np.maximum(1.0 - r2, np.finfo(np.float64).eps) * (n - 2)
    return FeatureScores(scores=scores, method=ScoreMethod.F_REGRESSION)


def mutual_information(x: np.ndarray, y: np.ndarray, bins: int) -> float:
    """
    I(X;Y) = H(X) + H(Y) - H(X,Y) in nats from equal-frequency histograms, clamped at 0
    """
    x_codes = equal_frequency_bins(x, bins)
    y_codes = equal_frequency_bins(y, bins)
    ky = int(y_codes.max()) + 1
    joint = np.bincount(x_codes * ky + y_codes)
    mi = _entropy(np.bincount(x_codes)) + _entropy(np.bincount(y_codes)) - _entropy(joint)
    return max(mi, 0.0)


def mutual_info_scores(ds: Dataset, cfg: MiEstimatorConfig = MiEstimatorConfig()) -> FeatureScores:
    """
    Mutual information of every feature with the target

    Raises:
        InsufficientSamples: If n < 2 * bins
    """
    n = ds.n_samples
    bins = cfg.resolve_bins(n)
    if n < 2 * bins:
        raise InsufficientSamples(f"{n} samples are too few for {bins} bins (need {2 * bins})")
    scores = np.array([mutual_information(ds.features[:, j], ds.target, bins)
                       for j in range(ds.n_features)])
    return FeatureScores(scores=scores, method=ScoreMethod.MUTUAL_INFO)


def chi_squared_statistic(observed: np.ndarray, expected: Optional[np.ndarray] = None) -> float:
    """
    Sum of (O - E)^2 / E over a contingency table

    Without `expected`, E is the independence expectation row_total * col_total / n.
    Cells with E == 0 are skipped.
    """
    observed = np.atleast_2d(np.asarray(observed, dtype=np.float64))
    if expected is None:
        total = observed.sum()
        expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / total
    expected = np.atleast_2d(np.asarray(expected, dtype=np.float64))
    mask = expected > 0
    return float(np.sum((observed[mask] - expected[mask]) ** 2 / expected[mask]))


def target_classes(y: np.ndarray, target_bins: int) -> np.ndarray:
    """Integral targets (or ones with few levels) are used as classes; others are binned"""
    levels = np.unique(y)
    if levels.shape[0] < 2:
        raise DegenerateTarget("target has fewer than 2 distinct values")
    if np.all(y == np.round(y)) or levels.shape[0] <= target_bins:
        return np.searchsorted(levels, y)
    return equal_frequency_bins(y, target_bins)


def chi_squared_scores(ds: Dataset, target_bins: int = 5, feature_bins: int = 5) -> FeatureScores:
    """
    Chi-squared independence statistic of every binned feature against the target classes

    Raises:
        DegenerateTarget: If the target has fewer than 2 distinct values
    """
    if target_bins < 2 or feature_bins < 2:
        raise ParamError("chi-squared needs at least 2 target and 2 feature bins")
    classes = target_classes(ds.target, target_bins)
    n_classes = int(classes.max()) + 1
    scores = np.zeros(ds.n_features)
    for j in range(ds.n_features):
        codes = equal_frequency_bins(ds.features[:, j], feature_bins)
        n_codes = int(codes.max()) + 1
        table = np.bincount(codes * n_classes + classes,
                            minlength=n_codes * n_classes).reshape(n_codes, n_classes)
        scores[j] = chi_squared_statistic(table)
    return FeatureScores(scores=scores, method=ScoreMethod.CHI_SQUARED)


def lasso_importance_scores(ds: Dataset, lam: float = 0.1) -> FeatureScores:
    """|coefficient| of a Lasso fit; features zeroed by the penalty score 0"""
    model = fit_lasso(ds.features, ds.target, lam)
    return FeatureScores(scores=np.abs(model.coefficients), method=ScoreMethod.LASSO_COEFFICIENTS)


def forest_importance_scores(ds: Dataset, params: ForestParams = ForestParams()) -> FeatureScores:
    """Impurity importances of a random forest"""
    model = fit_forest(ds.features, ds.target, params)
    return FeatureScores(scores=model.importances.copy(), method=ScoreMethod.FOREST_IMPORTANCE)


# ========== Selectors ==========

def identity_selector(d: int) -> SelectorModel:
    return _index_model(SelectorKind.IDENTITY, d, range(d))


def select_k_best(scores: FeatureScores, k: int) -> SelectorModel:
    """
    Keep the k highest-scoring features, ties going to the lower index

    Raises:
        ParamError: If k is not in [1, d]
    """
    d = scores.scores.shape[0]
    if not 1 <= k <= d:
        raise ParamError(f"k must be in [1, {d}], got {k}")
    ranking = scores.ranking()
    kept = np.flatnonzero(ranking < k)
    return _index_model(SelectorKind.KBEST, d, kept, ranking)


def pca_fit(ds: Dataset, k: int) -> SelectorModel:
    """
    Project onto the top-k eigenvectors of the (1/n) covariance matrix

    Returns:
        SelectorModel: projection V_k, column means, variance explained (%) per
        kept component and all eigenvalues
    """
    d = ds.n_features
    if not 1 <= k <= d:
        raise ParamError(f"PCA k must be in [1, {d}], got {k}")
    means = ds.features.mean(axis=0)
    eig = eig_symmetric(covariance(ds.features))
    eigenvalues = np.clip(eig.eigenvalues, 0.0, None)
    total = eigenvalues.sum()
    explained = eigenvalues / total * 100.0 if total > 0 else np.zeros(d)
    return SelectorModel(
        kind=SelectorKind.PCA,
        n_features_in=d,
        projection=eig.eigenvectors[:, :k].copy(),
        means=means,
        variance_explained=tuple(float(v) for v in explained[:k]),
        eigenvalues=tuple(float(v) for v in eig.eigenvalues),
    )


def selector_transform(model: SelectorModel, X) -> np.ndarray:
    """
    Apply a fitted selector

    Raises:
        ShapeError: If X width differs from the fitted width
    """
    X = as_matrix(X, "X")
    if X.shape[1] != model.n_features_in:
        raise ShapeError(f"selector fitted on {model.n_features_in} features, got {X.shape[1]}")
    if model.steps:
        for step in model.steps:
            X = selector_transform(step, X)
        return X
    if model.kept_indices is not None:
        return X[:, list(model.kept_indices)]
    return (X - model.means) @ model.projection


def selector_inverse_transform(model: SelectorModel, Z) -> np.ndarray:
    """Map PCA coordinates back to the input space, Z V_k^T + mu"""
    if model.kind is not SelectorKind.PCA:
        raise StrategyError("only PCA selectors can be inverted")
    Z = as_matrix(Z, "Z")
    if Z.shape[1] != model.projection.shape[1]:
        raise ShapeError(f"expected {model.projection.shape[1]} components, got {Z.shape[1]}")
    return Z @ model.projection.T + model.means


# ========== Recursive Feature Elimination ==========

Scorer = Callable[[np.ndarray, np.ndarray, FoldPlan], float]


def make_cv_scorer(fit_fn: Callable) -> Scorer:
    """
    Build an RFE scorer: mean held-out RMSE of fit_fn over a fold plan

    Args:
        fit_fn: (X, y) -> model accepted by regress.predict
    """
    def score(X: np.ndarray, y: np.ndarray, plan: FoldPlan) -> float:
        errors = []
        for fold in range(plan.k):
            train, test = plan.train_indices(fold), plan.test_indices(fold)
            model = fit_fn(X[train], y[train])
            residual = y[test] - predict(model, X[test])
            errors.append(math.sqrt(float(np.mean(residual ** 2))))
        return float(np.mean(errors))
    return score


def rfe_fit(ds: Dataset, n_select: int, scorer: Scorer, inner_folds: int = 3,
            seed: int = 42, n_jobs: int = 1) -> SelectorModel:
    """
    Recursive feature elimination, one feature per round

    Each round scores every remaining feature i by score(X without i) on a
    fixed inner fold plan and drops the feature whose removal gives the lowest
    score; equal scores drop the higher index.

    Args:
        ds: Training data
        n_select: Features to keep, 1 <= n_select < d
        scorer: (X, y, plan) -> loss, e.g. from make_cv_scorer
        inner_folds: Fold count of the inner plan, >= 2
        seed: Seed of the inner fold plan
        n_jobs: joblib workers for the per-round candidate evaluations

    Returns:
        SelectorModel: kept indices, elimination order and a ranking
        (kept features first, then the reverse elimination order)
    """
    d = ds.n_features
    if not 1 <= n_select < d:
        raise ParamError(f"RFE n_select must be in [1, {d - 1}], got {n_select}")
    if inner_folds < 2:
        raise ParamError(f"RFE inner_folds must be >= 2, got {inner_folds}")
    plan = kfold(ds.n_samples, inner_folds, seed)
    X, y = ds.features, ds.target

    remaining = list(range(d))
    eliminated = []
    while len(remaining) > n_select:
        subsets = [[f for f in remaining if f != drop] for drop in remaining]
        if n_jobs == 1:
            losses = [scorer(X[:, cols], y, plan) for cols in subsets]
        else:
            losses = Parallel(n_jobs=n_jobs)(delayed(scorer)(X[:, cols], y, plan) for cols in subsets)
        best = 0
        for i in range(1, len(losses)):
            if losses[i] <= losses[best]:
                best = i
        eliminated.append(remaining.pop(best))

    ranking = np.empty(d, dtype=int)
    ranking[remaining + eliminated[::-1]] = np.arange(d)
    return _index_model(SelectorKind.RFE, d, remaining, ranking,
                        elimination_order=tuple(eliminated))


# ========== Ensembles ==========

def ensemble_combine(selections: Sequence[SelectorModel], strategy: EnsembleStrategy,
                     k: Optional[int] = None) -> SelectorModel:
    """
    Combine fitted selectors

    Chain: members were fitted one after another, each on its predecessor's
    output; index-based members fold into original-feature indices and at
    most one PCA may close the chain. MajorityVote: members were fitted on the
    same features; keep those chosen by at least ceil(m/2) members, then the
    k best by mean rank.

    Raises:
        StrategyError: PCA in a vote, or a PCA that is not last in a chain
        ShapeError: Member widths that do not line up
    """
    if not selections:
        raise ParamError("an ensemble needs at least one selector")
    if len(selections) == 1:
        return selections[0]
    if strategy is EnsembleStrategy.CHAIN:
        return _chain(selections)
    return _majority_vote(selections, k)


def _chain(selections: Sequence[SelectorModel]) -> SelectorModel:
    for position, member in enumerate(selections):
        if not member.is_index_based and position != len(selections) - 1:
            raise StrategyError("PCA may only be the last step of a chain")
        if position > 0 and member.n_features_in != selections[position - 1].n_features_out:
            raise ShapeError(
                f"chain step {position} expects {member.n_features_in} features, "
                f"previous step yields {selections[position - 1].n_features_out}"
            )
    d = selections[0].n_features_in
    kept = list(range(d))
    for member in selections:
        if not member.is_index_based:
            break
        kept = [kept[i] for i in member.kept_indices]
    indexed = _index_model(SelectorKind.ENSEMBLE, d, kept)
    if selections[-1].is_index_based:
        return indexed
    return SelectorModel(kind=SelectorKind.ENSEMBLE, n_features_in=d,
                         steps=(indexed, selections[-1]))


def _majority_vote(selections: Sequence[SelectorModel], k: Optional[int]) -> SelectorModel:
    if any(not member.is_index_based for member in selections):
        raise StrategyError("PCA has no per-feature vote; it cannot join a majority vote")
    d = selections[0].n_features_in
    if any(member.n_features_in != d for member in selections):
        raise ShapeError("majority-vote members must be fitted on the same features")
    m = len(selections)
    votes = np.zeros(d, dtype=int)
    for member in selections:
        votes[list(member.kept_indices)] += 1
    mean_rank = np.mean([member.ranking for member in selections], axis=0)
    chosen = np.flatnonzero(votes >= math.ceil(m / 2))
    order = sorted(chosen, key=lambda i: (mean_rank[i], i))
    if k is not None:
        if k < 1:
            raise ParamError(f"ensemble k must be >= 1, got {k}")
        order = order[:k]
    everything = sorted(range(d), key=lambda i: (-votes[i], mean_rank[i], i))
    ranking = np.empty(d, dtype=int)
    ranking[everything] = np.arange(d)
    return _index_model(SelectorKind.ENSEMBLE, d, order, ranking)
