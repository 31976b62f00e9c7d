"""
SleepFS Data Module
Dataset container, CSV ingestion, scaling, splitting, fold plans and the synthetic generator
"""

import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .core import make_rng
from .errors import DataIoError, FoldError, ParamError, ParseError, SchemaError, ShapeError, SplitError
from .linalg import as_matrix, as_vector

# Kaggle sleep-stress export headers and what they measure
SLEEP_COLUMNS: Dict[str, str] = {
    "sr": "snoring range",
    "rr": "respiration rate",
    "t": "body temperature",
    "lm": "limb movement rate",
    "bo": "blood oxygen levels",
    "rem": "eye movement",
    "sr.1": "number of hours slept",
    "hr": "heart rate",
}
SLEEP_TARGET = "sl"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """
    Feature matrix, target vector and their names

    Arrays are copied and made read-only on construction.
    """
    features: np.ndarray
    target: np.ndarray
    feature_names: Tuple[str, ...]
    target_name: str
    provenance: str = ""

    def __post_init__(self):
        features = as_matrix(self.features, "features")
        target = as_vector(self.target, features.shape[0], "target")
        names = tuple(str(name) for name in self.feature_names)
        if len(names) != features.shape[1]:
            raise ShapeError(f"{len(names)} feature names for {features.shape[1]} columns")
        if any(not name for name in names):
            raise SchemaError("feature names must be non-empty")
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be distinct")
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "target", _frozen(target))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows: Sequence[int]) -> "Dataset":
        """Dataset restricted to the given rows, in the given order"""
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.target[rows], self.feature_names,
                       self.target_name, self.provenance)

    def select_columns(self, indices: Sequence[int]) -> "Dataset":
        """Dataset restricted to the given feature columns"""
        indices = list(indices)
        return Dataset(self.features[:, indices], self.target,
                       tuple(self.feature_names[i] for i in indices),
                       self.target_name, self.provenance)

    def with_features(self, features: np.ndarray, names: Sequence[str]) -> "Dataset":
        """Same target, new feature matrix"""
        return Dataset(features, self.target, tuple(names), self.target_name, self.provenance)

    def with_target(self, target: np.ndarray) -> "Dataset":
        return Dataset(self.features, target, self.feature_names, self.target_name, self.provenance)


@dataclass(frozen=True)
class FoldPlan:
    """Fold index per row; fold sizes differ by at most one"""
    k: int
    assignments: np.ndarray

    def __post_init__(self):
        assignments = np.array(self.assignments, dtype=np.intp, copy=True)
        if self.k < 2:
            raise FoldError(f"need at least 2 folds, got {self.k}")
        if assignments.ndim != 1 or np.any(assignments < 0) or np.any(assignments >= self.k):
            raise FoldError(f"fold assignments must lie in [0, {self.k})")
        sizes = np.bincount(assignments, minlength=self.k)
        if np.any(sizes == 0) or sizes.max() - sizes.min() > 1:
            raise FoldError(f"unbalanced folds: sizes {sizes.tolist()}")
        assignments.setflags(write=False)
        object.__setattr__(self, "assignments", assignments)

    @property
    def n_samples(self) -> int:
        return self.assignments.shape[0]

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


@dataclass(frozen=True)
class SyntheticSpec:
    """Linear ground truth for the synthetic generator; zero coefficients mark irrelevant features"""
    n: int
    d: int
    true_coefficients: Tuple[float, ...]
    noise_sd: float = 0.0
    seed: int = 42

    def __post_init__(self):
        coefficients = tuple(float(c) for c in self.true_coefficients)
        object.__setattr__(self, "true_coefficients", coefficients)
        if self.n < 2:
            raise ParamError(f"synthetic n must be at least 2, got {self.n}")
        if self.d < 1:
            raise ParamError(f"synthetic d must be at least 1, got {self.d}")
        if len(coefficients) != self.d:
            raise ParamError(f"{len(coefficients)} coefficients given for d={self.d}")
        if not all(math.isfinite(c) for c in coefficients):
            raise ParamError("coefficients must be finite")
        if not any(c != 0.0 for c in coefficients):
            raise ParamError("at least one coefficient must be nonzero")
        if not math.isfinite(self.noise_sd) or self.noise_sd < 0:
            raise ParamError(f"noise_sd must be >= 0, got {self.noise_sd}")


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-score transform fitted on training data"""
    means: np.ndarray
    scales: np.ndarray
    constant: np.ndarray = field(repr=False)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] != self.means.shape[0]:
            raise ShapeError(f"standardizer fitted on {self.means.shape[0]} columns, got {X.shape[1]}")
        scaled = (X - self.means) / self.scales
        scaled[:, self.constant] = 0.0
        return scaled


@dataclass(frozen=True)
class TargetScaler:
    """Min-max target scaling to [0, 1]; a constant target keeps span 1"""
    minimum: float
    span: float

    @classmethod
    def fit(cls, y: np.ndarray) -> "TargetScaler":
        y = np.asarray(y, dtype=np.float64)
        span = float(y.max() - y.min())
        return cls(minimum=float(y.min()), span=span if span > 0 else 1.0)

    def apply(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.minimum) / self.span

    def inverse(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=np.float64) * self.span + self.minimum


def constant_columns(X: np.ndarray) -> np.ndarray:
    """Mask of columns whose population sd is negligible next to their magnitude"""
    X = np.asarray(X, dtype=np.float64)
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    return sds < 1e-12 * np.maximum(1.0, np.abs(means))


def load_csv(path: str, target_column: str) -> Dataset:
    """
    Load a numeric CSV with a header row

    Every column except target_column becomes a feature, in header order.

    Args:
        path: CSV file (UTF-8, comma separated, '.' decimal point)
        target_column: Header name of the target

    Returns:
        Dataset: provenance "csv:<path>"

    Raises:
        DataIoError: If the file cannot be read
        SchemaError: If the target is missing or header names repeat
        ParseError: If a cell is empty, non-numeric or not finite
    """
    if not os.path.isfile(path):
        raise DataIoError(f"dataset not found: {path}")
    try:
        # header=None keeps duplicate header names visible (pandas would rename them)
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False,
                          skipinitialspace=True, encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataIoError(f"failed to read {path}: {e}") from e
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed CSV {path}: {e}", row=0, column="") from e
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"{path} has no header row") from e

    header = [str(name).strip() for name in raw.iloc[0].tolist()]
    seen = set()
    for name in header:
        if name in seen:
            raise SchemaError(f"duplicate column name {name!r} in {path}", name=name)
        seen.add(name)
    if target_column not in header:
        raise SchemaError(f"target column {target_column!r} not in header of {path}", name=target_column)

    body = raw.iloc[1:].reset_index(drop=True)
    body.columns = header
    if body.empty:
        raise SchemaError(f"{path} has a header but no rows")

    cells = body.apply(lambda col: col.str.strip())
    values = cells.apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(values.to_numpy(dtype=np.float64))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        column = header[col]
        # +2: one for the header line, one for 1-based numbering
        raise ParseError(
            f"{path}: row {row + 2}, column {column!r}: {cells.iat[row, col]!r} is not a finite number",
            row=int(row) + 2, column=column,
        )

    feature_names = [name for name in header if name != target_column]
    return Dataset(
        features=values[feature_names].to_numpy(dtype=np.float64),
        target=values[target_column].to_numpy(dtype=np.float64),
        feature_names=tuple(feature_names),
        target_name=target_column,
        provenance=f"csv:{path}",
    )


def fit_standardizer(X: np.ndarray) -> Standardizer:
    """Fit population mean/sd per column; constant columns get scale 1 and are flagged"""
    X = as_matrix(X, "X")
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    constant = constant_columns(X)
    scales = np.where(constant, 1.0, scales)
    return Standardizer(means=means, scales=scales, constant=constant)


def standardize(ds: Dataset) -> Tuple[Dataset, Standardizer]:
    """
    Z-score every feature column with the population sd

    Args:
        ds: Dataset with at least 2 rows

    Returns:
        tuple: (standardized dataset, Standardizer to apply to held-out data).
        Constant columns come out as zeros and are flagged in Standardizer.constant.
    """
    if ds.n_samples < 2:
        raise ParamError(f"standardize needs at least 2 rows, got {ds.n_samples}")
    scaler = fit_standardizer(ds.features)
    return ds.with_features(scaler.apply(ds.features), ds.feature_names), scaler


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Shuffle rows and hold out round(n * test_fraction) of them, clamped to [1, n-1]

    Args:
        ds: Dataset to split
        test_fraction: Strictly between 0 and 1
        seed: PRNG seed

    Returns:
        tuple: (train, test)

    Raises:
        SplitError: If the fraction is out of range or a side would be empty
    """
    n = ds.n_samples
    if not 0.0 < test_fraction < 1.0:
        raise SplitError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if n < 2:
        raise SplitError(f"cannot split {n} row(s) into two non-empty sides")
    test_size = min(max(int(math.floor(n * test_fraction + 0.5)), 1), n - 1)
    order = make_rng(seed).permutation(n)
    return ds.subset(order[test_size:]), ds.subset(order[:test_size])


def kfold(n: int, k: int, seed: int) -> FoldPlan:
    """
    Shuffled k-fold assignment; the first n % k folds get one extra row

    Raises:
        FoldError: If k < 2 or k > n
    """
    if k < 2 or k > n:
        raise FoldError(f"need 2 <= k <= n, got k={k}, n={n}")
    order = make_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.intp)
    assignments[order] = np.arange(n) % k
    return FoldPlan(k=k, assignments=assignments)


def generate_synthetic(spec: SyntheticSpec) -> Tuple[Dataset, Tuple[int, ...]]:
    """
    Draw X ~ N(0, 1) i.i.d. and y = X beta + N(0, noise_sd)

    Returns:
        tuple: (dataset with features x1..xd and target y, indices of nonzero coefficients)
    """
    rng = make_rng(spec.seed)
    coefficients = np.asarray(spec.true_coefficients)
    X = rng.standard_normal((spec.n, spec.d))
    y = X @ coefficients
    if spec.noise_sd > 0:
        y = y + rng.normal(0.0, spec.noise_sd, spec.n)
    support = tuple(int(i) for i in np.flatnonzero(coefficients))
    ds = Dataset(
        features=X,
        target=y,
        feature_names=tuple(f"x{i + 1}" for i in range(spec.d)),
        target_name="y",
        provenance=f"synthetic:seed={spec.seed}",
    )
    return ds, support


def describe(ds: Dataset) -> List[str]:
    """Short human-readable summary lines for console output"""
    lines = [f"{ds.n_samples} rows, {ds.n_features} features, target '{ds.target_name}'"]
    for name in ds.feature_names:
        label = SLEEP_COLUMNS.get(name)
        lines.append(f"{name} ({label})" if label else name)
    return lines
