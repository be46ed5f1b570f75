"""
Test cases for the command line entry point
"""

import argparse

import numpy as np
import pandas as pd
import pytest

from sharevalue.exceptions import EXIT_ESTIMATION, EXIT_FAILURE, EXIT_INPUT, EXIT_OK, EXIT_USAGE
from sharevalue.main import main, parse_years
from sharevalue.services import report_service
from sharevalue.services.report_service import COEFFICIENTS_FILE, JSONL_FILE, SELECTION_FILE, YEARLY_STATS_FILE
from sharevalue.services.synthetic_service import TRUTH_FILES


def tree(directory):
    return {
        path.relative_to(directory).as_posix(): path.read_bytes()
        for path in sorted(directory.rglob("*"))
        if path.is_file()
    }


class TestSimulate:

    def test_writes_panel_and_truth(self, tmp_path):
        out_dir = tmp_path / "synthetic"
        code = main(["simulate", "--out-dir", str(out_dir), "--seed", "7", "--entities", "40", "--periods", "5",
                     "--missing-rate", "0.1", "--log-level", "warning"])
        assert code == EXIT_OK
        assert set(tree(out_dir)) == {"panel.csv", *TRUTH_FILES.values()}
        frame = pd.read_csv(out_dir / "panel.csv")
        assert list(frame.columns) == ["entity_id", "year", "price", "dps", "cfps", "bvps"]
        assert frame["entity_id"].nunique() == 40

    def test_settings_file(self, tmp_path):
        settings = tmp_path / "dgp.txt"
        settings.write_text("n_entities=15\nn_periods=4\nseed=3\n")
        assert main(["simulate", "--out-dir", str(tmp_path / "a"), "--config", str(settings)]) == EXIT_OK
        assert main(["simulate", "--out-dir", str(tmp_path / "b"), "--config", str(settings)]) == EXIT_OK
        assert tree(tmp_path / "a") == tree(tmp_path / "b")

    def test_missing_settings_file(self, tmp_path):
        code = main(["simulate", "--out-dir", str(tmp_path / "out"), "--config", str(tmp_path / "nope.txt")])
        assert code == EXIT_USAGE

    def test_invalid_settings(self, tmp_path):
        code = main(["simulate", "--out-dir", str(tmp_path / "out"), "--missing-rate", "1.5"])
        assert code == EXIT_USAGE
        assert not (tmp_path / "out").exists()


class TestReport:

    def test_full_report_is_reproducible(self, panel_csv, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["report", "--input", str(panel_csv), "--out-dir", str(first), "--years", "2006-2008"]) == EXIT_OK
        assert main(["report", "--input", str(panel_csv), "--out-dir", str(second), "--years", "2006-2008"]) == EXIT_OK

        files = tree(first)
        assert files == tree(second)
        for name in (SELECTION_FILE, COEFFICIENTS_FILE, YEARLY_STATS_FILE, JSONL_FILE, "drop_ledger.csv"):
            assert name in files
        assert {name for name in files if name.startswith("histograms/")} == {
            f"histograms/divergence_hist_{year}.csv" for year in (2006, 2007, 2008)
        }

    def test_model_override(self, panel_csv, tmp_path):
        out_dir = tmp_path / "out"
        assert main(["report", "--input", str(panel_csv), "--out-dir", str(out_dir), "--model", "pooled"]) == EXIT_OK
        selection = (out_dir / SELECTION_FILE).read_text()
        assert "Selected model: pooled" in selection
        assert "overridden" in selection
        coefficients = (out_dir / COEFFICIENTS_FILE).read_text()
        assert "(selected)" in coefficients and "(fundamentals)" in coefficients

    @pytest.mark.parametrize("command,expected", [
        ("fit", {COEFFICIENTS_FILE, JSONL_FILE}),
        ("select", {SELECTION_FILE, COEFFICIENTS_FILE, JSONL_FILE}),
    ])
    def test_partial_commands(self, panel_csv, tmp_path, command, expected):
        out_dir = tmp_path / "out"
        assert main([command, "--input", str(panel_csv), "--out-dir", str(out_dir), "--robust", "classical"]) == EXIT_OK
        assert set(tree(out_dir)) == expected | {"drop_ledger.csv"}

    def test_empty_year_selection(self, panel_csv, tmp_path):
        out_dir = tmp_path / "out"
        code = main(["fundamentals", "--input", str(panel_csv), "--out-dir", str(out_dir), "--years", "1990"])
        assert code == EXIT_ESTIMATION
        assert not out_dir.exists() or tree(out_dir) == {}


class TestExitCodes:

    def test_malformed_input(self, malformed_csv, tmp_path):
        out_dir = tmp_path / "out"
        assert main(["report", "--input", str(malformed_csv), "--out-dir", str(out_dir)]) == EXIT_INPUT
        assert not out_dir.exists() or tree(out_dir) == {}

    def test_missing_input(self, tmp_path):
        code = main(["fit", "--input", str(tmp_path / "missing.csv"), "--out-dir", str(tmp_path / "out")])
        assert code == EXIT_INPUT

    @pytest.mark.parametrize("argv", [
        ["explode", "--out-dir", "x"],
        ["report", "--out-dir", "x"],
        ["report", "--input", "p.csv", "--out-dir", "x", "--robust", "hc3"],
        ["report", "--input", "p.csv", "--out-dir", "x", "--model", "ols"],
        ["report", "--input", "p.csv", "--out-dir", "x", "--alpha", "1.5"],
        ["report", "--input", "p.csv", "--out-dir", "x", "--years", "2009-2001"],
        [],
    ])
    def test_usage_errors(self, tmp_path, monkeypatch, argv):
        monkeypatch.chdir(tmp_path)
        assert main(argv) == EXIT_USAGE

    def test_collinear_regressors(self, tmp_path):
        rng = np.random.default_rng(8)
        rows = []
        for entity in range(20):
            for year in range(2001, 2006):
                dps = float(np.exp(rng.normal()))
                rows.append({
                    "entity_id": f"F{entity:02d}", "year": year, "price": float(np.exp(rng.normal(2.0))),
                    "dps": dps, "cfps": 3.0 * dps, "bvps": float(np.exp(rng.normal(1.0))),
                })
        path = tmp_path / "collinear.csv"
        pd.DataFrame(rows).to_csv(path, index=False)
        code = main(["fit", "--input", str(path), "--out-dir", str(tmp_path / "out"), "--model", "pooled"])
        assert code == EXIT_ESTIMATION
        assert not (tmp_path / "out").exists()

    def test_write_failure(self, panel_csv, tmp_path, monkeypatch):
        def broken_replace(source, target):
            raise OSError("read-only file system")

        monkeypatch.setattr(report_service.os, "replace", broken_replace)
        code = main(["fit", "--input", str(panel_csv), "--out-dir", str(tmp_path / "out")])
        assert code == EXIT_FAILURE


class TestParseYears:

    @pytest.mark.parametrize("text,expected", [
        ("2008", [2008]),
        ("2008,2006", [2006, 2008]),
        ("2006-2009", [2006, 2007, 2008, 2009]),
        ("2005, 2007-2008,2005", [2005, 2007, 2008]),
    ])
    def test_valid(self, text, expected):
        assert parse_years(text) == expected

    @pytest.mark.parametrize("text", ["", "abc", "2009-2001", "2008.5", ","])
    def test_invalid(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_years(text)
