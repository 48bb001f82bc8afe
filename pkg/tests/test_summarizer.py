import csv
import json
import math

import pytest

from src.config import RunConfig
from src.statistics import Estimate, EstimateMethod
from src.summarizer import RESULTS_HEADER, SCHEMA_VERSION, CheckResult, ExperimentResult, Summarizer, format_output


@pytest.fixture
def summarizer():
    config = RunConfig().with_overrides(seed=1)
    summarizer = Summarizer(config, "battery")
    estimate = Estimate(value=1.02, std_error=0.01, n_eff=1000.0, method=EstimateMethod.GAUSSIAN)
    summarizer.add(
        [
            ExperimentResult(
                "first",
                [CheckResult.at_most("first.residual", 1e-14, 1e-12), CheckResult.agreement("first.mean", estimate, 1.0, 3.0)],
                tables={"rows.csv": [{"a": 1, "b": 0.5}]},
                documents={"notes.json": {"count": 2}},
            ),
            ExperimentResult(
                "second",
                [CheckResult.flag("second.flag", False)],
                tables={"rows.csv": [{"a": 2, "b": 1.5}]},
                documents={"notes.json": {"count": 3}},
            ),
        ]
    )
    return summarizer


def test_check_constructors():
    assert CheckResult.at_most("x", 1.0, 2.0).passed
    assert not CheckResult.at_most("x", math.nan, 2.0).passed
    assert CheckResult.at_least("x", 3.0, 2.0).passed
    first = Estimate(value=1.0, std_error=0.1, n_eff=100.0, method=EstimateMethod.GAUSSIAN)
    second = Estimate(value=1.5, std_error=0.1, n_eff=100.0, method=EstimateMethod.GAUSSIAN)
    comparison = CheckResult.comparison("x", first, second, n_sigma=3.0)
    assert comparison.value == pytest.approx(0.5)
    assert not comparison.passed
    assert CheckResult.agreement("x", first, 1.2, n_sigma=3.0).passed


def test_summary_counts_failures(summarizer):
    summary = summarizer.summary()
    assert summary["schema_version"] == SCHEMA_VERSION
    assert summary["status"] == "fail"
    assert summary["passed"] == 2
    assert summary["failed"] == 1
    assert summary["failing"] == ["second.flag"]
    assert summary["checks"][2]["value"] is None
    assert summary["checks"][2]["bound"] is None
    assert not summarizer.passed


def test_write_produces_every_report(summarizer, tmp_path):
    directory = summarizer.write(tmp_path / "out")
    with (directory / "results.csv").open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == RESULTS_HEADER
    assert rows[1] == ["first.residual", "1e-14", "0.0", "1e-12", "true"]
    assert rows[3][-1] == "false"

    with (directory / "rows.csv").open(encoding="utf-8") as handle:
        assert handle.read() == "a,b\n1,0.5\n2,1.5\n"
    assert json.loads((directory / "notes.json").read_text()) == {"first": {"count": 2}, "second": {"count": 3}}

    summary = json.loads((directory / "summary.json").read_text())
    assert summary == summarizer.summary()
    manifest = json.loads((directory / "manifest.json").read_text())
    assert manifest["subcommand"] == "battery"
    assert manifest["seed"] == 1
    assert manifest["config"]["lattice"]["n_alpha"] == 16
    assert "numpy" in manifest["versions"]


def test_results_are_byte_identical_across_writes(summarizer, tmp_path):
    first = summarizer.write(tmp_path / "a")
    second = summarizer.write(tmp_path / "b")
    assert (first / "results.csv").read_bytes() == (second / "results.csv").read_bytes()


def test_format_output_lists_failures(summarizer, tmp_path):
    text = format_output(summarizer.summary(), tmp_path)
    assert text.startswith("# thermalphi: FAIL")
    assert "- [FAIL] second.flag" in text
    assert "## Failing Checks" in text
