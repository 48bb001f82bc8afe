import asyncio
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from .config import RunConfig
from .estimate import NelsonVariant
from .experiments.base_experiment import BaseExperiment
from .experiments.battery import battery_experiments
from .experiments.fock_checks import FockExperiment
from .experiments.nelson import NelsonExperiment
from .experiments.sampling import SamplingExperiment
from .experiments.tabulation import TabulationExperiment
from .experiments.tube_scan import TubeScanExperiment
from .summarizer import ExperimentResult, Summarizer

LOGGER = logging.getLogger(__name__)

SUBCOMMANDS: Dict[str, Callable[[RunConfig], List[BaseExperiment]]] = {
    "sample": lambda config: [SamplingExperiment(config)],
    "battery": battery_experiments,
    "tube-scan": lambda config: [TubeScanExperiment(config)],
    "fock": lambda config: [FockExperiment(config)],
    "nelson": lambda config: [
        NelsonExperiment(config, variant, stream) for stream, variant in enumerate(NelsonVariant)
    ],
    "tabulate-oracles": lambda config: [TabulationExperiment(config)],
}


class Orchestrator:
    def __init__(self, threads: int = 1):
        """Initialize the orchestrator with the number of experiments allowed to run at once."""
        if threads < 1:
            raise ValueError(f"threads must be positive, got {threads}")
        self.threads = threads

    async def run(self, experiments: Sequence[BaseExperiment]) -> List[ExperimentResult]:
        """
        Run experiments concurrently under the thread cap.

        Args:
            experiments: The experiments to run

        Returns:
            One result per experiment, in submission order
        """
        semaphore = asyncio.Semaphore(self.threads)
        LOGGER.info("Running %d experiments on %d threads", len(experiments), self.threads)
        return list(await asyncio.gather(*(experiment.execute(semaphore) for experiment in experiments)))


def build_experiments(subcommand: str, config: RunConfig) -> List[BaseExperiment]:
    try:
        factory = SUBCOMMANDS[subcommand]
    except KeyError:
        raise ValueError(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}") from None
    return factory(config)


async def run_subcommand(subcommand: str, config: RunConfig, out: Optional[Path] = None) -> Summarizer:
    """
    Run one subcommand end to end and write its reports.

    Args:
        subcommand: One of SUBCOMMANDS
        config: The validated configuration with command-line overrides applied
        out: Output directory; defaults to the configured one

    Returns:
        The summarizer holding every check, already written to disk
    """
    experiments = build_experiments(subcommand, config)
    results = await Orchestrator(config.threads).run(experiments)
    summarizer = Summarizer(config, subcommand)
    summarizer.add(results)
    summarizer.write(out)
    return summarizer
