"""End-to-end tests for the sleepfs command line"""

import csv
import json
import os

import pytest

from main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


def _generate(tmp_path, coef="3,0,-2,0", n=100, seed=1, name="data.csv", noise="0.1"):
    path = str(tmp_path / name)
    code = main(["generate", "--n", str(n), "--d", str(len(coef.split(","))), "--coef", coef,
                 "--noise", noise, "--seed", str(seed), "--out", path])
    return code, path


def _score_rows(capsys, args):
    assert main(["score", *args]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    return lines[0], [line.split() for line in lines[1:]]


class TestGenerate:
    def test_shape_and_support(self, tmp_path):
        code, path = _generate(tmp_path, coef="1,0,0,2,0,0,-1,0", n=100)
        assert code == EXIT_OK
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert len(rows) == 101
        assert all(len(row) == 9 for row in rows)
        assert rows[0][-1] == "y"
        with open(path + ".support.json") as f:
            assert json.load(f)["support"] == [0, 3, 6]

    def test_same_seed_same_bytes(self, tmp_path):
        _, a = _generate(tmp_path, name="a.csv")
        _, b = _generate(tmp_path, name="b.csv")
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()

    @pytest.mark.parametrize("kwargs", [{"noise": "-1"}, {"coef": "a,b"}, {"coef": "0,0"}])
    def test_invalid(self, tmp_path, kwargs):
        code, path = _generate(tmp_path, **kwargs)
        assert code == EXIT_USAGE
        assert not os.path.exists(path)

    def test_coefficient_count_mismatch(self, tmp_path):
        out = str(tmp_path / "x.csv")
        assert main(["generate", "--n", "10", "--d", "3", "--coef", "1,2", "--out", out]) == EXIT_USAGE


class TestScore:
    def test_f_regression_ranks_relevant_first(self, tmp_path, capsys):
        _, path = _generate(tmp_path, coef="3,0,0,0")
        header, rows = _score_rows(capsys, ["--data", path, "--target", "y", "--method", "f-regression"])
        assert header.split() == ["feature", "f_regression"]
        assert rows[0][0] == "x1"
        values = [float(r[1]) for r in rows]
        assert values == sorted(values, reverse=True)

    def test_mutual_info(self, tmp_path, capsys):
        _, path = _generate(tmp_path, coef="3,0,0,0")
        _, rows = _score_rows(capsys, ["--data", path, "--target", "y", "--method", "mutual-info", "--bins", "5"])
        assert rows[0][0] == "x1"

    def test_rfe_rounds_survived(self, tmp_path, capsys):
        _, path = _generate(tmp_path)
        header, rows = _score_rows(capsys, ["--data", path, "--target", "y", "--method", "rfe", "--k", "2"])
        assert header.split()[1] == "rounds_survived"
        assert {rows[0][0], rows[1][0]} == {"x1", "x3"}

    def test_pca_components(self, tmp_path, capsys):
        _, path = _generate(tmp_path)
        _, rows = _score_rows(capsys, ["--data", path, "--target", "y", "--method", "pca"])
        assert [r[0] for r in rows] == ["PC1", "PC2", "PC3", "PC4"]
        assert sum(float(r[1]) for r in rows) == pytest.approx(100.0, abs=1e-3)

    def test_unknown_method(self, tmp_path, capsys):
        _, path = _generate(tmp_path)
        assert main(["score", "--data", path, "--target", "y", "--method", "magic"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_missing_target(self, tmp_path):
        _, path = _generate(tmp_path)
        assert main(["score", "--data", path, "--target", "nope", "--method", "chi2"]) == EXIT_USAGE


class TestRun:
    def test_success(self, small_config, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", small_config(), "--out", str(out), "--quiet"]) == EXIT_OK
        assert (out / "results.json").exists()
        assert (out / "table.md").read_text(encoding="utf-8").count("\n") == 6

    def test_seed_override(self, small_config, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", small_config(), "--out", str(out), "--seed", "9"]) == EXIT_OK
        with open(out / "results.json") as f:
            assert json.load(f)["metadata"]["seed"] == 9

    def test_missing_regressors(self, small_config, tmp_path):
        assert main(["run", "--config", small_config(regressors=[]), "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_missing_dataset_is_runtime_failure(self, small_config, tmp_path):
        path = small_config(dataset={"csv": "missing.csv", "target": "y"})
        assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_RUNTIME

    def test_no_subcommand(self, capsys):
        assert main([]) == EXIT_USAGE
