"""Tests for src/report.py: results table, importance chart and results JSON"""

import json

import pytest

from src.errors import ChartError, EmptyReport, ParamError
from src.evaluation import CvSummary
from src.report import (BAR_AREA, CHART_WIDTH, ROW_HEIGHT, ExperimentResult, TableFormat, bar_lengths,
                        read_results_json, render_importance_chart, render_table, write_results_json)

METADATA = {"seed": 42, "config_digest": "abc123", "timestamp": "2026-01-01T00:00:00+00:00"}


def _result(selector="kbest+rfe+pca", regressor="LinearRegression", mean=0.0132, std=0.0004,
            test_rmse=0.0125, r2=0.9912, importances=None):
    return ExperimentResult(selector, regressor, CvSummary.from_folds([mean - std, mean + std]),
                            test_rmse, r2, ("x1", "x2"), importances)


class TestTable:
    def test_linear_row(self):
        text = render_table([_result()])
        lines = text.splitlines()
        assert len(lines) == 3
        assert lines[0] == "| Feature Selection | Regressor | CV RMSE | Test RMSE | R-squared |"
        assert lines[2] == "| kbest+rfe+pca | LinearRegression | 0.01 +/- 0.00 | 0.01 | 0.99 |"

    def test_lasso_row(self):
        row = render_table([_result(regressor="Lasso", mean=0.0912, std=0.0101, r2=0.95)]).splitlines()[2]
        assert "0.09 +/- 0.01" in row and row.endswith("| 0.95 |")

    def test_grouping(self):
        results = [_result(regressor="LinearRegression"), _result(selector="other", regressor="Ridge"),
                   _result(regressor="Lasso")]
        rows = render_table(results).splitlines()[2:]
        assert rows[0].startswith("| kbest+rfe+pca | LinearRegression")
        assert rows[1].startswith("|  | Lasso")
        assert rows[2].startswith("| other | Ridge")

    def test_pipes_escaped_in_every_cell(self):
        row = render_table([_result(selector="a|b", regressor="Forest|50")]).splitlines()[2]
        assert row.startswith("| a\\|b | Forest\\|50 | ")
        assert row.replace("\\|", "").count("|") == 6

    def test_csv(self):
        text = render_table([_result(), _result(regressor="Ridge")], TableFormat.CSV)
        lines = text.splitlines()
        assert lines[0] == "Feature Selection,Regressor,CV RMSE,Test RMSE,R-squared"
        assert lines[2].startswith("kbest+rfe+pca,Ridge,")

    def test_byte_stable(self):
        results = [_result(), _result(regressor="Forest")]
        assert render_table(results) == render_table(results)

    def test_empty(self):
        with pytest.raises(EmptyReport):
            render_table([])

    def test_result_validation(self):
        with pytest.raises(ParamError):
            _result(selector="")
        with pytest.raises(ParamError):
            _result(test_rmse=-1.0)


class TestChart:
    def test_linear_scale(self):
        bars = bar_lengths({"b": 0.1, "a": 0.2})
        assert [name for name, _, _ in bars] == ["a", "b"]
        assert bars[0][2] == pytest.approx(2 * bars[1][2], abs=0.5)

    def test_single_full_width(self):
        ((_, _, length),) = bar_lengths({"only": 0.3})
        assert length == pytest.approx(BAR_AREA)

    def test_document(self, tmp_path):
        path = tmp_path / "chart.svg"
        svg = render_importance_chart({"sr.1": 0.2, "bo": 0.18, "hr": 0.05}, str(path))
        assert path.read_text(encoding="utf-8") == svg
        assert 'version="1.1"' in svg
        assert f'width="{CHART_WIDTH}" height="{3 * ROW_HEIGHT}"' in svg
        assert "<script" not in svg
        assert svg.index("sr.1") < svg.index("bo") < svg.index("hr")
        assert "0.20" in svg

    def test_escapes_labels(self):
        assert "a&lt;b" in render_importance_chart({"a<b": 1.0})

    @pytest.mark.parametrize("importances", [{}, {"a": -0.1}, {"a": float("nan")}])
    def test_invalid(self, importances):
        with pytest.raises(ChartError):
            render_importance_chart(importances)


class TestResultsJson:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "results.json"
        result = _result(importances={"x1": 0.7, "x2": 0.3})
        write_results_json([result], METADATA, str(path))
        document = read_results_json(str(path))
        assert document["metadata"] == METADATA
        (row,) = document["results"]
        assert row["selector"] == result.selector_label
        assert row["fold_rmse"] == list(result.cv.fold_rmse)
        assert row["cv_rmse_mean"] == result.cv.mean
        assert row["importances"] == {"x1": 0.7, "x2": 0.3}
        assert row["selected_features"] == ["x1", "x2"]

    def test_sorted_keys(self, tmp_path):
        path = tmp_path / "results.json"
        write_results_json([_result()], METADATA, str(path))
        text = path.read_text(encoding="utf-8")
        assert text == json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n"

    def test_empty_results(self, tmp_path):
        path = tmp_path / "results.json"
        write_results_json([], METADATA, str(path))
        assert read_results_json(str(path))["results"] == []
