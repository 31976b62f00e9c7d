"""
SleepFS Settings Module
Loads and validates the JSON experiment config
"""

import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from packaging import version

from .core import CONFIG_VERSION
from .data import SyntheticSpec
from .errors import ConfigError, ParamError
from .evaluation import (KBEST_SCORES, REGRESSOR_KINDS, TECHNIQUE_KINDS, RegressorSpec,
                         SelectorSpec, TechniqueSpec)
from .selection import EnsembleStrategy

RFE_ESTIMATORS = ("linear", "ridge", "lasso", "forest")


@dataclass(frozen=True)
class DatasetSource:
    """Either a CSV file + target column or a synthetic spec"""
    csv_path: Optional[str] = None
    target_column: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSource
    selector_ensembles: Tuple[SelectorSpec, ...]
    regressors: Tuple[RegressorSpec, ...]
    target_scaling: bool = True
    test_fraction: float = 0.2
    cv_folds: int = 5
    seed: int = 42
    global_selection: bool = False
    n_jobs: int = 1
    digest: str = field(default="", compare=False)


class _Validator:
    """Checks values and anchors failures to the line of the offending key"""

    def __init__(self, text: str):
        self.text = text

    def line_of(self, key: str) -> int:
        match = re.search(r'"' + re.escape(key) + r'"\s*:', self.text)
        if not match:
            return 1
        return self.text.count("\n", 0, match.start()) + 1

    def fail(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, line=self.line_of(key))

    def require(self, mapping: Dict[str, Any], key: str, where: str) -> Any:
        if not isinstance(mapping, dict):
            raise self.fail(where, f"'{where}' must be an object")
        if key not in mapping:
            raise self.fail(where, f"'{where}' is missing required key '{key}'")
        return mapping[key]

    def integer(self, value: Any, key: str, minimum: Optional[int] = None) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(key, f"'{key}' must be an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.fail(key, f"'{key}' must be >= {minimum}, got {value}")
        return value

    def number(self, value: Any, key: str, minimum: Optional[float] = None,
               strict: bool = False) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise self.fail(key, f"'{key}' must be a finite number, got {value!r}")
        if minimum is not None and (value <= minimum if strict else value < minimum):
            bound = ">" if strict else ">="
            raise self.fail(key, f"'{key}' must be {bound} {minimum}, got {value}")
        return float(value)

    def flag(self, value: Any, key: str) -> bool:
        if not isinstance(value, bool):
            raise self.fail(key, f"'{key}' must be true or false, got {value!r}")
        return value

    def choice(self, value: Any, key: str, options) -> str:
        if value not in options:
            raise self.fail(key, f"'{key}' must be one of {', '.join(options)}, got {value!r}")
        return value


def config_digest(raw: Dict[str, Any]) -> str:
    """SHA-256 of the canonical (sorted, compact) JSON form"""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _check_version(raw: Dict[str, Any], check: _Validator) -> None:
    declared = str(raw.get("version", CONFIG_VERSION))
    try:
        parsed = version.parse(declared)
    except version.InvalidVersion:
        raise check.fail("version", f"invalid config version {declared!r}")
    if parsed.major != version.parse(CONFIG_VERSION).major:
        raise check.fail("version", f"config version {declared} is not compatible with {CONFIG_VERSION}")


def _parse_dataset(raw: Any, base_dir: str, check: _Validator) -> DatasetSource:
    if not isinstance(raw, dict):
        raise check.fail("dataset", "'dataset' must be an object")
    if "csv" in raw:
        path = raw["csv"]
        if not isinstance(path, str) or not path:
            raise check.fail("csv", "'csv' must be a file path")
        target = check.require(raw, "target", "dataset")
        if not isinstance(target, str) or not target:
            raise check.fail("target", "'target' must be a column name")
        if not os.path.isabs(path):
            path = os.path.normpath(os.path.join(base_dir, path))
        return DatasetSource(csv_path=path, target_column=target)
    if "synthetic" in raw:
        spec = raw["synthetic"]
        n = check.integer(check.require(spec, "n", "synthetic"), "n", 2)
        d = check.integer(check.require(spec, "d", "synthetic"), "d", 1)
        coefficients = check.require(spec, "coefficients", "synthetic")
        if not isinstance(coefficients, list):
            raise check.fail("coefficients", "'coefficients' must be a list of numbers")
        coefficients = [check.number(c, "coefficients") for c in coefficients]
        noise = check.number(spec.get("noise_sd", 0.0), "noise_sd", 0.0)
        seed = check.integer(spec.get("seed", 42), "seed", 0)
        try:
            synthetic = SyntheticSpec(n, d, tuple(coefficients), noise, seed)
        except ParamError as e:
            raise check.fail("synthetic", str(e))
        return DatasetSource(synthetic=synthetic)
    raise check.fail("dataset", "'dataset' needs either 'csv' + 'target' or 'synthetic'")


def _parse_technique(raw: Any, check: _Validator) -> TechniqueSpec:
    kind = check.choice(check.require(raw, "kind", "techniques"), "kind", TECHNIQUE_KINDS)
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise check.fail("params", "'params' must be an object")
    if kind == "kbest":
        check.choice(params.get("score", "f_regression"), "score", KBEST_SCORES)
        if "k" in params:
            check.integer(params["k"], "k", 1)
        if params.get("bins") is not None:
            check.integer(params["bins"], "bins", 2)
        for key in ("target_bins", "feature_bins"):
            if key in params:
                check.integer(params[key], key, 2)
        if "lambda" in params:
            check.number(params["lambda"], "lambda", 0.0, strict=True)
        if "n_trees" in params:
            check.integer(params["n_trees"], "n_trees", 1)
    elif kind == "rfe":
        if "n_select" in params:
            check.integer(params["n_select"], "n_select", 1)
        if "inner_folds" in params:
            check.integer(params["inner_folds"], "inner_folds", 2)
        estimator = check.choice(params.get("estimator", "linear"), "estimator", RFE_ESTIMATORS)
        _check_regressor_params(estimator, params.get("estimator_params", {}), check)
    elif kind == "pca":
        if "k" in params:
            check.integer(params["k"], "k", 1)
    return TechniqueSpec(kind=kind, params=dict(params))


def _parse_ensemble(raw: Any, check: _Validator) -> SelectorSpec:
    label = check.require(raw, "label", "selector_ensembles")
    if not isinstance(label, str) or not label.strip():
        raise check.fail("label", "ensemble 'label' must be a non-empty string")
    strategy_name = check.choice(raw.get("strategy", "chain"), "strategy",
                                 [s.value for s in EnsembleStrategy])
    strategy = EnsembleStrategy(strategy_name)
    techniques = raw.get("techniques", [])
    if not isinstance(techniques, list):
        raise check.fail("techniques", "'techniques' must be a list")
    parsed = tuple(_parse_technique(t, check) for t in techniques)
    if strategy is EnsembleStrategy.CHAIN:
        pca_positions = [i for i, t in enumerate(parsed) if t.kind == "pca"]
        if pca_positions and pca_positions != [len(parsed) - 1]:
            raise check.fail("techniques", f"ensemble '{label}': PCA may only close a chain")
    elif any(t.kind == "pca" for t in parsed):
        raise check.fail("strategy", f"ensemble '{label}': PCA cannot take part in a majority vote")
    k = raw.get("k")
    if k is not None:
        check.integer(k, "k", 1)
    return SelectorSpec(label=label, techniques=parsed, strategy=strategy, k=k)


def _check_regressor_params(kind: str, params: Any, check: _Validator) -> None:
    if not isinstance(params, dict):
        raise check.fail("params", "regressor 'params' must be an object")
    if kind == "ridge" and "lambda" in params:
        check.number(params["lambda"], "lambda", 0.0)
    if kind == "lasso":
        if "lambda" in params:
            check.number(params["lambda"], "lambda", 0.0, strict=True)
        if "tol" in params:
            check.number(params["tol"], "tol", 0.0, strict=True)
        if "max_iter" in params:
            check.integer(params["max_iter"], "max_iter", 1)
    if kind == "forest":
        for key, minimum in (("n_trees", 1), ("min_samples_leaf", 1), ("features_per_split", 1),
                             ("max_depth", 0), ("seed", 0)):
            if params.get(key) is not None:
                check.integer(params[key], key, minimum)
        if "bootstrap" in params:
            check.flag(params["bootstrap"], "bootstrap")


def _parse_regressor(raw: Any, check: _Validator) -> RegressorSpec:
    kind = check.choice(check.require(raw, "kind", "regressors"), "kind", REGRESSOR_KINDS)
    params = raw.get("params", {})
    _check_regressor_params(kind, params, check)
    label = raw.get("label", "")
    if not isinstance(label, str):
        raise check.fail("label", "regressor 'label' must be a string")
    return RegressorSpec(kind=kind, params=dict(params), label=label)


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    """
    Parse and validate a JSON experiment config

    Args:
        text: JSON document
        base_dir: Directory relative CSV paths resolve against

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: With the line of the offending key
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", line=e.lineno)
    check = _Validator(text)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_version(raw, check)

    dataset = _parse_dataset(check.require(raw, "dataset", "config"), base_dir, check)

    ensembles = check.require(raw, "selector_ensembles", "config")
    if not isinstance(ensembles, list) or not ensembles:
        raise check.fail("selector_ensembles", "'selector_ensembles' must be a non-empty list")
    regressors = check.require(raw, "regressors", "config")
    if not isinstance(regressors, list) or not regressors:
        raise check.fail("regressors", "'regressors' must be a non-empty list")

    test_fraction = check.number(raw.get("test_fraction", 0.2), "test_fraction", 0.0, strict=True)
    if test_fraction >= 1.0:
        raise check.fail("test_fraction", f"'test_fraction' must be < 1, got {test_fraction}")

    n_jobs = check.integer(raw.get("n_jobs", 1), "n_jobs")
    if n_jobs == 0:
        raise check.fail("n_jobs", "'n_jobs' must be non-zero (-1 uses every core)")

    return ExperimentConfig(
        dataset=dataset,
        selector_ensembles=tuple(_parse_ensemble(e, check) for e in ensembles),
        regressors=tuple(_parse_regressor(r, check) for r in regressors),
        target_scaling=check.flag(raw.get("target_scaling", True), "target_scaling"),
        test_fraction=test_fraction,
        cv_folds=check.integer(raw.get("cv_folds", 5), "cv_folds", 2),
        seed=check.integer(raw.get("seed", 42), "seed", 0),
        global_selection=check.flag(raw.get("global_selection", False), "global_selection"),
        n_jobs=n_jobs,
        digest=config_digest(raw),
    )


def load_config(path: str) -> ExperimentConfig:
    """
    Read and validate a config file

    Raises:
        ConfigError: If the file is missing, unreadable or invalid
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def validate_against(config: ExperimentConfig, n_samples: int, n_features: int) -> List[str]:
    """
    Dimension checks that need the loaded dataset

    Returns:
        list: Problems found (empty when the config fits the data)
    """
    problems = []
    if config.cv_folds > n_samples:
        problems.append(f"cv_folds={config.cv_folds} exceeds {n_samples} rows")
    for ensemble in config.selector_ensembles:
        width = n_features
        for technique in ensemble.techniques:
            params = technique.params
            where = f"ensemble '{ensemble.label}', {technique.kind}"
            if technique.kind == "kbest":
                k = params.get("k", math.ceil(width / 2))
                if k > width:
                    problems.append(f"{where}: k={k} exceeds {width} available features")
                out = min(k, width)
            elif technique.kind == "rfe":
                n_select = params.get("n_select", math.ceil(width / 2))
                if n_select >= width:
                    problems.append(f"{where}: n_select={n_select} must be below {width} features")
                out = min(n_select, width)
            elif technique.kind == "pca":
                k = params.get("k", width)
                if k > width:
                    problems.append(f"{where}: k={k} exceeds {width} available features")
                out = min(k, width)
            else:
                out = width
            if ensemble.strategy is EnsembleStrategy.CHAIN:
                width = out
    return problems
