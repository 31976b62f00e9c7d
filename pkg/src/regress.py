"""
SleepFS Regression Module
Ordinary least squares, Ridge, Lasso by coordinate descent and a CART random forest
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from .core import make_rng
from .errors import NoConvergence, ParamError, ShapeError
from .linalg import as_matrix, as_vector, lstsq


class PenaltyKind(Enum):
    NONE = "none"
    L2 = "l2"
    L1 = "l1"


@dataclass(frozen=True)
class Penalty:
    kind: PenaltyKind = PenaltyKind.NONE
    strength: float = 0.0


@dataclass(frozen=True)
class LinearModel:
    """y ~ intercept + X . coefficients"""
    intercept: float
    coefficients: np.ndarray
    penalty: Penalty = Penalty()
    n_iter: int = 0

    @property
    def n_features_in(self) -> int:
        return self.coefficients.shape[0]


@dataclass(frozen=True)
class ConstantModel:
    """Predicts the training mean everywhere"""
    value: float
    n_features_in: int


@dataclass(frozen=True)
class TreeLeaf:
    prediction: float
    samples: int


@dataclass(frozen=True)
class TreeSplit:
    """Rows with x[feature] <= threshold go left"""
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    impurity_decrease: float
    samples: int


TreeNode = Union[TreeLeaf, TreeSplit]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    features_per_split: Optional[int] = None  # None -> max(1, d // 3)
    bootstrap: bool = True
    seed: int = 42
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ParamError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ParamError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ParamError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ParamError(f"features_per_split must be >= 1, got {self.features_per_split}")
        if self.seed < 0:
            raise ParamError(f"seed must be >= 0, got {self.seed}")

    def resolve_features_per_split(self, d: int) -> int:
        if self.features_per_split is None:
            return max(1, d // 3)
        return min(self.features_per_split, d)


@dataclass(frozen=True)
class ForestModel:
    trees: Tuple[TreeNode, ...]
    importances: np.ndarray
    params: ForestParams
    n_features_in: int = field(default=0)


Model = Union[LinearModel, ForestModel, ConstantModel]


def _check_xy(X, y) -> Tuple[np.ndarray, np.ndarray]:
    X = as_matrix(X, "X")
    y = as_vector(y, X.shape[0], "y")
    return X, y


# ========== Linear Models ==========

def fit_ols(X, y) -> LinearModel:
    """
    Ordinary least squares with an unpenalised intercept

    Args:
        X: n x d design, n > d, full column rank with the intercept column
        y: Target of length n

    Returns:
        LinearModel: penalty NONE

    Raises:
        RankDeficient: Propagated from lstsq
    """
    X, y = _check_xy(X, y)
    n, d = X.shape
    if n <= d:
        raise ShapeError(f"OLS needs more rows than features, got {n} x {d}")
    augmented = np.column_stack([np.ones(n), X])
    beta = lstsq(augmented, y)
    return LinearModel(intercept=float(beta[0]), coefficients=beta[1:])


def ridge_coefficients(X, y, alpha: float) -> np.ndarray:
    """
    Solve (X^T X + alpha I) beta = X^T y with no intercept

    Solved as least squares on the stacked system [X; sqrt(alpha) I] beta = [y; 0].
    """
    X, y = _check_xy(X, y)
    if alpha < 0:
        raise ParamError(f"ridge penalty must be >= 0, got {alpha}")
    d = X.shape[1]
    stacked = np.vstack([X, np.sqrt(alpha) * np.eye(d)])
    padded = np.concatenate([y, np.zeros(d)])
    return lstsq(stacked, padded)


def fit_ridge(X, y, lam: float = 1.0) -> LinearModel:
    """
    Ridge regression, beta = (Xc^T Xc + n lambda I)^-1 Xc^T yc on centred data

    Args:
        X: Standardised n x d design
        y: Target of length n
        lam: Penalty >= 0; 0 reduces to fit_ols

    Returns:
        LinearModel: penalty L2(lam), intercept unpenalised
    """
    X, y = _check_xy(X, y)
    if not np.isfinite(lam) or lam < 0:
        raise ParamError(f"ridge lambda must be >= 0, got {lam}")
    penalty = Penalty(PenaltyKind.L2, float(lam))
    if lam == 0:
        ols = fit_ols(X, y)
        return LinearModel(ols.intercept, ols.coefficients, penalty)
    n = X.shape[0]
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    beta = ridge_coefficients(X - x_mean, y - y_mean, n * lam)
    return LinearModel(float(y_mean - x_mean @ beta), beta, penalty)


def soft_threshold(z: float, t: float) -> float:
    """S(z, t) = sign(z) * max(|z| - t, 0)"""
    return float(np.sign(z) * max(abs(z) - t, 0.0))


def lambda_max(X, y) -> float:
    """Smallest Lasso penalty whose solution is identically zero"""
    X, y = _check_xy(X, y)
    Xc = X - X.mean(axis=0)
    return float(np.max(np.abs(Xc.T @ (y - y.mean()))) / X.shape[0])


def fit_lasso(X, y, lam: float = 0.1, tol: float = 1e-8, max_iter: int = 10000) -> LinearModel:
    """
    Lasso by cyclic coordinate descent

    Minimises (1/2n)||y - b0 - X beta||^2 + lam * sum|beta_j|; the intercept
    is recovered as the mean residual after fitting on centred data.

    Args:
        X: Standardised n x d design
        y: Target of length n
        lam: Penalty > 0
        tol: Stop once the largest coefficient change in a sweep is below tol
        max_iter: Maximum number of full sweeps

    Returns:
        LinearModel: penalty L1(lam) and the number of sweeps used

    Raises:
        NoConvergence: If max_iter sweeps do not reach tol
    """
    X, y = _check_xy(X, y)
    if not np.isfinite(lam) or lam <= 0:
        raise ParamError(f"lasso lambda must be > 0, got {lam}")
    if tol <= 0 or max_iter < 1:
        raise ParamError(f"need tol > 0 and max_iter >= 1, got tol={tol}, max_iter={max_iter}")

    n, d = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    residual = y - y_mean
    col_sq = np.sum(Xc * Xc, axis=0) / n
    beta = np.zeros(d)

    for iteration in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = Xc[:, j] @ residual / n + col_sq[j] * old
            # rho and lambda_max round differently; treat a tie as zero
            if abs(rho) <= lam * (1.0 + 1e-12):
                new = 0.0
            else:
                new = soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                residual -= Xc[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            intercept = float(y_mean - x_mean @ beta)
            return LinearModel(intercept, beta, Penalty(PenaltyKind.L1, float(lam)), n_iter=iteration)

    raise NoConvergence(f"lasso did not converge in {max_iter} sweeps", iterations=max_iter)


def fit_mean(X, y) -> ConstantModel:
    """Baseline that ignores X"""
    X, y = _check_xy(X, y)
    return ConstantModel(value=float(y.mean()), n_features_in=X.shape[1])


# ========== Forest ==========

def _best_split(X: np.ndarray, y: np.ndarray, candidates: np.ndarray, n_try: int,
                min_leaf: int) -> Optional[Tuple[int, float, float]]:
    """
    Best split over the first n_try non-constant features in candidate order

    All tried features are scored in one pass over an m x n_try block; ties
    go to the earlier candidate and then to the lower threshold.

    Returns:
        tuple: (feature, threshold, SSE reduction) of the best split, or None
    """
    m = y.shape[0]
    block = X[:, candidates]
    usable = candidates[block.min(axis=0) < block.max(axis=0)][:n_try]
    if usable.size == 0:
        return None
    centred = y - y.mean()
    total_sse = float(centred @ centred)

    cols = X[:, usable]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    ys = centred[order]
    left_sum = np.cumsum(ys, axis=0)[:-1]
    left_sq = np.cumsum(ys * ys, axis=0)[:-1]
    left_n = np.arange(1, m)[:, None]
    right_n = m - left_n
    right_sum = left_sum[-1] + ys[-1] - left_sum
    right_sq = total_sse - left_sq
    sse = (left_sq - left_sum ** 2 / left_n) + (right_sq - right_sum ** 2 / right_n)
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not np.any(valid):
        return None

    gains = np.where(valid, total_sse - sse, -np.inf)
    positions = np.argmax(gains, axis=0)
    column = int(np.argmax(gains[positions, np.arange(usable.size)]))
    pos = int(positions[column])
    lo, hi = xs[pos, column], xs[pos + 1, column]
    threshold = (lo + hi) / 2.0
    if threshold >= hi:
        threshold = lo
    return int(usable[column]), float(threshold), float(gains[pos, column])


def _grow(X: np.ndarray, y: np.ndarray, depth: int, params: ForestParams, n_try: int,
          rng: np.random.Generator, n_root: int) -> TreeNode:
    m = y.shape[0]
    leaf = TreeLeaf(prediction=float(y.mean()), samples=m)
    if m < 2 * params.min_samples_leaf or np.ptp(y) == 0.0:
        return leaf
    if params.max_depth is not None and depth >= params.max_depth:
        return leaf
    candidates = rng.permutation(X.shape[1])
    split = _best_split(X, y, candidates, n_try, params.min_samples_leaf)
    if split is None or split[2] <= 0.0:
        return leaf
    feature, threshold, gain = split
    goes_left = X[:, feature] <= threshold
    left = _grow(X[goes_left], y[goes_left], depth + 1, params, n_try, rng, n_root)
    right = _grow(X[~goes_left], y[~goes_left], depth + 1, params, n_try, rng, n_root)
    # sample-weighted impurity decrease: (m / N) * (var - weighted child var) == gain / N
    return TreeSplit(feature, threshold, left, right, gain / n_root, m)


def _fit_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, index: int) -> TreeNode:
    rng = make_rng(params.seed, index)
    n = X.shape[0]
    if params.bootstrap:
        rows = rng.integers(0, n, n)
        X, y = X[rows], y[rows]
    n_try = params.resolve_features_per_split(X.shape[1])
    return _grow(X, y, 0, params, n_try, rng, n)


def _accumulate_importances(node: TreeNode, totals: np.ndarray) -> None:
    stack = [node]
    while stack:
        current = stack.pop()
        if isinstance(current, TreeSplit):
            totals[current.feature] += current.impurity_decrease
            stack.append(current.left)
            stack.append(current.right)


def fit_forest(X, y, params: ForestParams = ForestParams()) -> ForestModel:
    """
    Random forest of variance-reduction CART trees

    Tree t draws its bootstrap sample and per-node feature subsets from the
    PRNG stream (seed, t), so any n_jobs gives the same forest.

    Args:
        X: n x d design, n >= 2
        y: Target of length n
        params: Forest hyper-parameters

    Returns:
        ForestModel: importances are the normalised sum of impurity decreases
        over all trees (all zero when no split happened)
    """
    X, y = _check_xy(X, y)
    if X.shape[0] < 2:
        raise ShapeError(f"forest needs at least 2 rows, got {X.shape[0]}")
    if params.n_jobs == 1:
        trees = [_fit_tree(X, y, params, t) for t in range(params.n_trees)]
    else:
        trees = Parallel(n_jobs=params.n_jobs)(
            delayed(_fit_tree)(X, y, params, t) for t in range(params.n_trees)
        )
    totals = np.zeros(X.shape[1])
    for tree in trees:
        _accumulate_importances(tree, totals)
    grand_total = totals.sum()
    importances = totals / grand_total if grand_total > 0 else totals
    return ForestModel(tuple(trees), importances, params, n_features_in=X.shape[1])


def _predict_tree(node: TreeNode, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
    stack: List[Tuple[TreeNode, np.ndarray]] = [(node, rows)]
    while stack:
        current, idx = stack.pop()
        if idx.size == 0:
            continue
        if isinstance(current, TreeLeaf):
            out[idx] = current.prediction
            continue
        goes_left = X[idx, current.feature] <= current.threshold
        stack.append((current.left, idx[goes_left]))
        stack.append((current.right, idx[~goes_left]))


def predict(model: Model, X) -> np.ndarray:
    """
    Predict with any fitted model

    Raises:
        ShapeError: If X width differs from the training width
    """
    X = as_matrix(X, "X")
    if X.shape[1] != model.n_features_in:
        raise ShapeError(f"model fitted on {model.n_features_in} features, got {X.shape[1]}")
    if isinstance(model, LinearModel):
        return model.intercept + X @ model.coefficients
    if isinstance(model, ConstantModel):
        return np.full(X.shape[0], model.value)
    rows = np.arange(X.shape[0])
    total = np.zeros(X.shape[0])
    buffer = np.empty(X.shape[0])
    for tree in model.trees:
        _predict_tree(tree, X, rows, buffer)
        total += buffer
    return total / len(model.trees)
