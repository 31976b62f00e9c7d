"""Tests for src/settings.py: JSON experiment config parsing and validation"""

import json
import os

import pytest

from src.errors import ConfigError
from src.selection import EnsembleStrategy
from src.settings import load_config, parse_config, validate_against

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

MINIMAL = {
    "dataset": {"csv": "data.csv", "target": "y"},
    "selector_ensembles": [{"label": "f", "techniques": [{"kind": "kbest", "params": {"k": 2}}]}],
    "regressors": [{"kind": "linear"}],
}


def _text(**changes):
    document = json.loads(json.dumps(MINIMAL))
    document.update(changes)
    return json.dumps(document, indent=2)


class TestParse:
    def test_defaults(self):
        config = parse_config(_text(), "/base")
        assert config.dataset.csv_path == os.path.normpath("/base/data.csv")
        assert config.dataset.target_column == "y"
        assert (config.test_fraction, config.cv_folds, config.seed) == (0.2, 5, 42)
        assert config.target_scaling and not config.global_selection
        assert config.selector_ensembles[0].strategy is EnsembleStrategy.CHAIN
        assert config.regressors[0].display_label == "linear"

    def test_synthetic_dataset(self):
        config = parse_config(_text(dataset={"synthetic": {"n": 30, "d": 2, "coefficients": [1, 0]}}))
        assert config.dataset.synthetic.true_coefficients == (1.0, 0.0)

    def test_digest_ignores_formatting(self):
        compact = json.dumps(MINIMAL)
        assert parse_config(compact).digest == parse_config(_text()).digest
        assert parse_config(_text(seed=1)).digest != parse_config(_text()).digest

    def test_missing_regressors(self):
        document = dict(MINIMAL)
        del document["regressors"]
        with pytest.raises(ConfigError):
            parse_config(json.dumps(document))

    def test_error_names_line(self):
        text = _text(cv_folds=1)
        line = next(i for i, row in enumerate(text.splitlines(), 1) if '"cv_folds"' in row)
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.line == line
        assert str(info.value).startswith(f"line {line}:")

    def test_invalid_json(self):
        with pytest.raises(ConfigError) as info:
            parse_config('{\n  "dataset": ,\n}')
        assert info.value.line == 2

    def test_incompatible_version(self):
        with pytest.raises(ConfigError):
            parse_config(_text(version="2.0"))

    def test_unknown_regressor(self):
        with pytest.raises(ConfigError):
            parse_config(_text(regressors=[{"kind": "svm"}]))

    def test_pca_cannot_vote(self):
        ensembles = [{"label": "v", "strategy": "majority_vote",
                      "techniques": [{"kind": "kbest"}, {"kind": "pca", "params": {"k": 1}}]}]
        with pytest.raises(ConfigError):
            parse_config(_text(selector_ensembles=ensembles))

    def test_pca_must_close_chain(self):
        ensembles = [{"label": "c", "techniques": [{"kind": "pca"}, {"kind": "kbest"}]}]
        with pytest.raises(ConfigError):
            parse_config(_text(selector_ensembles=ensembles))

    @pytest.mark.parametrize("changes", [
        {"test_fraction": 1.0}, {"n_jobs": 0}, {"seed": -1}, {"target_scaling": "yes"},
        {"regressors": [{"kind": "lasso", "params": {"lambda": 0}}]},
        {"regressors": [{"kind": "forest", "params": {"n_trees": 0}}]},
    ])
    def test_rejects_bad_values(self, changes):
        with pytest.raises(ConfigError):
            parse_config(_text(**changes))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.json"))


class TestDimensionChecks:
    def test_k_larger_than_features(self):
        config = parse_config(_text())
        assert validate_against(config, 50, 4) == []
        assert validate_against(config, 50, 1)

    def test_folds_exceed_rows(self):
        assert validate_against(parse_config(_text(cv_folds=10)), 5, 4)

    def test_chain_narrows_width(self):
        ensembles = [{"label": "c", "techniques": [{"kind": "kbest", "params": {"k": 2}},
                                                    {"kind": "pca", "params": {"k": 3}}]}]
        assert validate_against(parse_config(_text(selector_ensembles=ensembles)), 50, 6)


class TestBundledConfigs:
    @pytest.mark.parametrize("name", ["benchmark.json", "benchmark-sleep.json"])
    def test_table_layout(self, name):
        config = load_config(os.path.join(REPO_ROOT, "configs", name))
        assert len(config.selector_ensembles) == 3
        assert len(config.regressors) == 4
        assert validate_against(config, 630, 8) == []

    @pytest.mark.parametrize("name", ["benchmark.json", "benchmark-sleep.json"])
    def test_rfe_estimators(self, name):
        config = load_config(os.path.join(REPO_ROOT, "configs", name))
        estimators = [t.params["estimator"] for e in config.selector_ensembles
                      for t in e.techniques if t.kind == "rfe"]
        assert estimators == ["forest", "linear"]

    @pytest.mark.parametrize("name", ["benchmark.json", "benchmark-sleep.json"])
    def test_ridge_penalty_is_light(self, name):
        config = load_config(os.path.join(REPO_ROOT, "configs", name))
        ridge = next(r for r in config.regressors if r.kind == "ridge")
        assert ridge.params["lambda"] <= 1e-3
