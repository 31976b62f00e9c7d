"""Shared fixtures for the SleepFS test-suite"""

import json

import numpy as np
import pytest

from src import core
from src.data import Dataset, SyntheticSpec, generate_synthetic


@pytest.fixture(autouse=True)
def quiet_console():
    """Keep INFO lines and progress bars out of test output"""
    core.set_quiet(True)
    yield
    core.set_quiet(False)


@pytest.fixture
def linear_dataset():
    """y = 2*x1 + 1 exactly, with an irrelevant second column"""
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 2))
    y = 2.0 * X[:, 0] + 1.0
    return Dataset(X, y, ("x1", "x2"), "y", "test")


@pytest.fixture
def sparse_synthetic():
    """n=200, d=6, three relevant features (indices 0, 2, 4)"""
    spec = SyntheticSpec(200, 6, (2.0, 0.0, -1.5, 0.0, 1.0, 0.0), noise_sd=0.3, seed=11)
    ds, support = generate_synthetic(spec)
    return ds, support


@pytest.fixture
def write_csv(tmp_path):
    """Write rows (first row = header) to a CSV under tmp_path and return its path"""
    def _write(rows, name="data.csv"):
        path = tmp_path / name
        path.write_text("\n".join(",".join(str(c) for c in row) for row in rows) + "\n", encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def small_config(tmp_path):
    """A quick synthetic experiment config: 2 ensembles x 2 regressors"""
    def _config(**overrides):
        document = {
            "version": "1.0",
            "dataset": {"synthetic": {"n": 80, "d": 4, "coefficients": [1.0, 0.0, -0.5, 0.0],
                                      "noise_sd": 0.1, "seed": 3}},
            "cv_folds": 3,
            "seed": 5,
            "selector_ensembles": [
                {"label": "kbest-f", "techniques": [{"kind": "kbest", "params": {"k": 2}}]},
                {"label": "kbest+pca", "strategy": "chain", "techniques": [
                    {"kind": "kbest", "params": {"score": "mutual_info", "k": 3}},
                    {"kind": "pca", "params": {"k": 2}},
                ]},
            ],
            "regressors": [
                {"kind": "linear", "label": "LinearRegression"},
                {"kind": "forest", "params": {"n_trees": 5}},
            ],
        }
        document.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(document, indent=2), encoding="utf-8")
        return str(path)
    return _config
