import asyncio
import csv
import json
import time
from unittest.mock import patch

import pytest

from main import EXIT_ERROR, EXIT_FAILED, EXIT_PASSED, main
from src.config import BatterySection, validate_config
from src.errors import ExperimentError
from src.experiments.base_experiment import BaseExperiment
from src.orchestrator import Orchestrator, build_experiments
from src.summarizer import CheckResult, ExperimentResult

SMALL_CONFIG = """
[lattice]
beta = 1.0
L = 1.0
n_alpha = 8
n_x = 8

[measure]
P = [0.0, 0.0, 0.0, 0.0, 0.05]

[run]
n_samples = 400
seed = 12
threads = 2
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_CONFIG, encoding="utf-8")
    return path


class SleepyExperiment(BaseExperiment):
    def __init__(self, config, name, delay, fail=False):
        super().__init__(config)
        self.name = name
        self.delay = delay
        self.fail = fail

    def run(self) -> ExperimentResult:
        time.sleep(self.delay)
        if self.fail:
            raise RuntimeError("boom")
        return ExperimentResult(self.name, [CheckResult.flag(self.name, True)])


@pytest.mark.asyncio
async def test_sample_subcommand_writes_reports(config_path, tmp_path):
    out = tmp_path / "out"
    code = await main(["sample", "--config", str(config_path), "--out", str(out)])
    assert code == EXIT_PASSED
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "pass"
    with (out / "samples.csv").open(encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 400
    assert set(rows[0]) == {"index", "weight", "phi_0", "interaction_action"}
    document = json.loads((out / "sample.json").read_text())
    assert document["sample"]["estimator"] == "Reweighting"


@pytest.mark.asyncio
async def test_runs_are_reproducible(config_path, tmp_path):
    for name in ("a", "b"):
        await main(["sample", "--config", str(config_path), "--out", str(tmp_path / name), "--threads", "1"])
    for report in ("results.csv", "samples.csv"):
        assert (tmp_path / "a" / report).read_bytes() == (tmp_path / "b" / report).read_bytes()


@pytest.mark.asyncio
async def test_seed_flag_changes_the_draws(config_path, tmp_path):
    await main(["sample", "--config", str(config_path), "--out", str(tmp_path / "a")])
    await main(["sample", "--config", str(config_path), "--out", str(tmp_path / "b"), "--seed", "13"])
    assert (tmp_path / "a" / "samples.csv").read_bytes() != (tmp_path / "b" / "samples.csv").read_bytes()


@pytest.mark.asyncio
async def test_zero_tolerance_fails_the_battery(config_path, tmp_path):
    disabled = "\n".join(f"{name} = false" for name in BatterySection.model_fields if name != "gaussian_moments")
    config_path.write_text(SMALL_CONFIG + "\n[battery]\n" + disabled + "\n", encoding="utf-8")
    out = tmp_path / "out"
    code = await main(["battery", "--config", str(config_path), "--out", str(out), "--tolerance-scale", "0"])
    assert code == EXIT_FAILED
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "fail"
    assert all(name.startswith("gaussian_moments.") for name in summary["failing"])


@pytest.mark.asyncio
async def test_errors_exit_with_code_two(config_path, tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")
    assert await main(["sample", "--config", str(config_path), "--out", str(blocker / "out")]) == EXIT_ERROR

    bad = tmp_path / "bad.toml"
    bad.write_text("[lattice]\nmass = -1.0\n", encoding="utf-8")
    assert await main(["sample", "--config", str(bad)]) == EXIT_ERROR
    assert "lattice.mass" in capsys.readouterr().out

    assert await main(["sample", "--config", str(tmp_path / "missing.toml")]) == EXIT_ERROR


@pytest.mark.asyncio
async def test_experiment_failures_are_reported_by_name(config_path, tmp_path, capsys):
    with patch("src.experiments.sampling.sample_measure", side_effect=RuntimeError("sampler down")):
        code = await main(["sample", "--config", str(config_path), "--out", str(tmp_path / "out")])
    assert code == EXIT_ERROR
    assert "sample: RuntimeError: sampler down" in capsys.readouterr().out


@pytest.mark.asyncio
async def test_orchestrator_keeps_submission_order():
    config = validate_config({})
    experiments = [SleepyExperiment(config, "slow", 0.05), SleepyExperiment(config, "fast", 0.0)]
    results = await Orchestrator(threads=2).run(experiments)
    assert [result.name for result in results] == ["slow", "fast"]


@pytest.mark.asyncio
async def test_orchestrator_wraps_experiment_errors():
    config = validate_config({})
    with pytest.raises(ExperimentError) as info:
        await Orchestrator(threads=1).run([SleepyExperiment(config, "broken", 0.0, fail=True)])
    assert info.value.experiment == "broken"
    assert isinstance(info.value.cause, RuntimeError)


def test_orchestrator_validation_and_dispatch():
    with pytest.raises(ValueError):
        Orchestrator(threads=0)
    config = validate_config({"battery": {"wick": False}})
    with pytest.raises(ValueError):
        build_experiments("unknown", config)
    battery = build_experiments("battery", config)
    names = list(BatterySection.model_fields)
    assert "wick" not in [experiment.name for experiment in battery]
    assert all(experiment.stream == names.index(experiment.name) for experiment in battery)
    nelson = build_experiments("nelson", config)
    assert [experiment.name for experiment in nelson] == ["nelson.exact", "nelson.ordering", "nelson.paired"]


def test_semaphore_caps_concurrency():
    config = validate_config({})
    running, peak = 0, 0

    class Counting(SleepyExperiment):
        def run(self):
            nonlocal running, peak
            running += 1
            peak = max(peak, running)
            try:
                return super().run()
            finally:
                running -= 1

    asyncio.run(Orchestrator(threads=2).run([Counting(config, f"e{i}", 0.02) for i in range(6)]))
    assert peak <= 2
